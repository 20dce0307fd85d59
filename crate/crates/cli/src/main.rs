//! `lal`: build learned active-learning strategies, run benchmarks and
//! analyze the results.

mod commands;
mod config;
mod plot;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lal", version, about = "Learned active-learning strategies")]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Output directory (overrides the config and LAL_OUTPUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a strategy from Monte-Carlo simulations.
    BuildStrategy(BuildArgs),
    /// Run strategies on a dataset and write learning curves.
    Run(RunArgs),
    /// Expected error reduction versus predicted probability.
    Motivate(MotivateArgs),
    /// Regressor importances and selection histograms.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `independent` or `iterative`.
    #[arg(long)]
    pub provenance: Option<String>,
    #[arg(long)]
    pub tau_min: Option<usize>,
    #[arg(long)]
    pub tau_max: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Strategy file name inside the output directory.
    #[arg(long)]
    pub output: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub metric: Option<String>,
    /// Replaces the config's strategy list; repeatable.
    #[arg(long = "strategy")]
    pub strategies: Vec<String>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct MotivateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "unbalanced")]
    pub balanced: bool,
    /// Class 0 twice as large as class 1.
    #[arg(long)]
    pub unbalanced: bool,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// LAL strategy file for the importance report.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Selection-trace CSVs written by `run`.
    #[arg(long = "traces", num_args = 1..)]
    pub traces: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long)]
    pub svg: bool,
}

/// Shared flags.
pub struct Global {
    pub workers: usize,
    pub force: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }

    pub fn from_validation(e: lal_core::Error) -> Self {
        Self::validation(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Runtime => 3,
        }
    }
}

impl From<lal_core::Error> for CliError {
    fn from(e: lal_core::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

impl fmt::Display for CliError {
    /// One line: `error kind=<validation|runtime> code=<n> message="<json string>"`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Validation => "validation",
            ErrorKind::Runtime => "runtime",
        };
        let message = serde_json::to_string(&self.message).unwrap_or_else(|_| "\"\"".into());
        write!(
            f,
            "error kind={kind} code={} message={message}",
            self.exit_code()
        )
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("invalid arguments");
            let err = CliError::validation(first.trim_start_matches("error: "));
            eprintln!("{err}");
            return ExitCode::from(err.exit_code());
        }
    };
    let global = Global {
        workers: cli.workers,
        force: cli.force,
        output_dir: cli.output_dir,
    };
    let result = match cli.command {
        Command::BuildStrategy(args) => commands::build_strategy(&args, &global),
        Command::Run(args) => commands::run(&args, &global),
        Command::Motivate(args) => commands::motivate(&args, &global),
        Command::Analyze(args) => commands::analyze(&args, &global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
