//! JSON experiment descriptions.

use std::fs;
use std::path::{Path, PathBuf};

use lal_core::data::{load_csv, Dataset, GeneratorSpec};
use lal_core::forest::{classifier_config, ForestConfig};
use lal_core::harness::{ExperimentData, MotivationConfig, StartMode};
use lal_core::lal_training::MonteCarloConfig;
use lal_core::metrics::Metric;
use lal_core::strategies::{Provenance, Strategy};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub const CONFIG_FORMAT: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "LAL_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "lal-output";

/// Reads a config file, checking `config_format` before the full parse so a
/// version mismatch is reported as such.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::validation(format!("config {} is not valid JSON: {e}", path.display()))
    })?;
    match value
        .get("config_format")
        .and_then(serde_json::Value::as_u64)
    {
        Some(v) if v == u64::from(CONFIG_FORMAT) => {}
        Some(v) => {
            return Err(CliError::validation(format!(
                "config {} has config_format {v}, expected {CONFIG_FORMAT}",
                path.display()
            )))
        }
        None => {
            return Err(CliError::validation(format!(
                "config {} lacks `config_format: {CONFIG_FORMAT}`",
                path.display()
            )))
        }
    }
    serde_json::from_value(value)
        .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}

/// Directory that relative paths in a config file are resolved against.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Flag, then environment, then config, then the default.
pub fn output_dir(flag: Option<&Path>, configured: Option<&Path>, base: &Path) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    match configured {
        Some(dir) => resolve(base, dir),
        None => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Csv {
        csv: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    Generated(GeneratorSpec),
}

fn default_label_column() -> String {
    "label".into()
}

impl DataSource {
    pub fn load(&self, base: &Path, test_fraction: f64) -> Result<ExperimentData, CliError> {
        match self {
            DataSource::Generated(spec) => Ok(ExperimentData::Generated {
                spec: spec.clone(),
                test_fraction,
            }),
            DataSource::Csv { csv, label_column } => {
                let path = resolve(base, csv);
                if !path.is_file() {
                    return Err(CliError::validation(format!(
                        "dataset {} does not exist",
                        path.display()
                    )));
                }
                let dataset = load_csv(&path, label_column).map_err(CliError::from_validation)?;
                Ok(ExperimentData::Fixed {
                    dataset,
                    test_fraction,
                })
            }
        }
    }

    pub fn load_dataset(&self, base: &Path, seed: u64) -> Result<Dataset, CliError> {
        match self {
            DataSource::Generated(spec) => spec.generate(seed).map_err(CliError::from_validation),
            DataSource::Csv { csv, label_column } => {
                let path = resolve(base, csv);
                if !path.is_file() {
                    return Err(CliError::validation(format!(
                        "dataset {} does not exist",
                        path.display()
                    )));
                }
                load_csv(&path, label_column).map_err(CliError::from_validation)
            }
        }
    }
}

/// Synthetic Gaussian-cloud representative data.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColdStartData {
    pub n_train: usize,
    pub n_test: usize,
    pub class0_fraction: f64,
    pub separation: f64,
}

impl Default for ColdStartData {
    fn default() -> Self {
        let d = lal_core::lal_training::ColdStartConfig::default();
        ColdStartData {
            n_train: d.n_train,
            n_test: d.n_test,
            class0_fraction: d.class0_fraction,
            separation: d.separation,
        }
    }
}

/// Labeled data from the target task, split into representative train and
/// test parts.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmStartData {
    pub data: DataSource,
    #[serde(default = "half")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representative {
    ColdStart(ColdStartData),
    WarmStart(WarmStartData),
}

impl Default for Representative {
    fn default() -> Self {
        Representative::ColdStart(ColdStartData::default())
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub config_format: u32,
    pub seed: u64,
    pub provenance: Provenance,
    #[serde(default)]
    pub representative: Representative,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default = "default_strategy_file")]
    pub output: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Also write the Monte-Carlo rows as CSV.
    #[serde(default)]
    pub export_rows: bool,
}

fn default_strategy_file() -> String {
    "strategy.json".into()
}

impl BuildConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.monte_carlo
            .validate()
            .map_err(CliError::from_validation)?;
        if let Representative::ColdStart(c) = &self.representative {
            if c.n_train <= self.monte_carlo.tau_max {
                return Err(CliError::validation(format!(
                    "n_train {} must exceed tau_max {}",
                    c.n_train, self.monte_carlo.tau_max
                )));
            }
            if c.n_test == 0 {
                return Err(CliError::validation("n_test must be positive"));
            }
        }
        check_file_name(&self.output)
    }
}

/// A strategy named in a run config: a built-in id or a strategy file.
#[derive(Debug, Clone)]
pub struct NamedStrategy {
    pub label: String,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_format: u32,
    pub seed: u64,
    pub data: DataSource,
    #[serde(default = "half")]
    pub test_fraction: f64,
    pub strategies: Vec<String>,
    pub budget: usize,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default = "default_start")]
    pub start: StartMode,
    pub repetitions: usize,
    #[serde(
        default = "ForestConfig::classifier",
        deserialize_with = "classifier_config"
    )]
    pub classifier: ForestConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write an SVG of the mean curves next to the CSVs.
    #[serde(default)]
    pub plot: bool,
}

fn default_metric() -> Metric {
    Metric::Accuracy
}

fn default_start() -> StartMode {
    StartMode::Cold
}

impl RunConfig {
    /// Everything checkable before any experiment work starts.
    pub fn validate(&self, data: &ExperimentData) -> Result<(), CliError> {
        if self.repetitions == 0 {
            return Err(CliError::validation("repetitions must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(CliError::validation("no strategies listed"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(CliError::validation("test_fraction must lie in (0, 1)"));
        }
        self.classifier
            .validate()
            .map_err(CliError::from_validation)?;
        let initial = self.start.initial_size();
        let train = data.train_size();
        if initial < 2 || initial >= train {
            return Err(CliError::validation(format!(
                "initial labeled size {initial} does not fit a training pool of {train}"
            )));
        }
        if self.budget > train - initial {
            return Err(CliError::validation(format!(
                "budget {} exceeds the unlabeled pool of {}",
                self.budget,
                train - initial
            )));
        }
        Ok(())
    }

    pub fn load_strategies(&self, base: &Path) -> Result<Vec<NamedStrategy>, CliError> {
        let mut out: Vec<NamedStrategy> = Vec::new();
        for entry in &self.strategies {
            let named = match entry.as_str() {
                "random" => NamedStrategy {
                    label: "random".into(),
                    strategy: Strategy::Random,
                },
                "uncertainty" => NamedStrategy {
                    label: "uncertainty".into(),
                    strategy: Strategy::Uncertainty,
                },
                file => {
                    let path = resolve(base, Path::new(file));
                    if !path.is_file() {
                        return Err(CliError::validation(format!(
                            "strategy `{file}` is neither `random`, `uncertainty` nor an existing file"
                        )));
                    }
                    let strategy = Strategy::load(&path).map_err(CliError::from_validation)?;
                    let label = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| strategy.id().to_string());
                    NamedStrategy { label, strategy }
                }
            };
            if out.iter().any(|s| s.label == named.label) {
                return Err(CliError::validation(format!(
                    "strategy label `{}` appears twice",
                    named.label
                )));
            }
            check_file_name(&named.label)?;
            out.push(named);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MotivateConfig {
    pub config_format: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: MotivationConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn check_file_name(name: &str) -> Result<(), CliError> {
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(CliError::validation(format!(
            "`{name}` is not a plain file name"
        )));
    }
    Ok(())
}
