use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lal_core::data::split;
use lal_core::harness::{
    importance_csv, motivation_csv, motivation_experiment, parse_selections_csv, peak_center,
    probability_histogram, regressor_importance_report, run_repeated, selections_csv,
    MotivationConfig, StrategyOutcome,
};
use lal_core::lal_training::{
    build_cold_start_strategy, build_lal_independent, build_lal_iterative, ColdStartConfig,
    RegressionSet,
};
use lal_core::metrics::Metric;
use lal_core::seed::{derive_seed, with_workers};
use lal_core::strategies::{Provenance, Strategy};
use serde_json::json;

use crate::config::{self, BuildConfig, MotivateConfig, Representative, RunConfig};
use crate::plot::{bar_chart, line_chart, Series};
use crate::{AnalyzeArgs, BuildArgs, CliError, Global, MotivateArgs, RunArgs};

const WARM_DATA_STREAM: u64 = 0;
const WARM_SPLIT_STREAM: u64 = 1;

/// Fails unless every target is absent or `--force` was given.
fn claim(paths: &[PathBuf], force: bool) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::validation(format!(
            "{} already exists; pass --force to overwrite",
            p.display()
        ))),
        None => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn parse_provenance(text: &str) -> Result<Provenance, CliError> {
    match text {
        "independent" => Ok(Provenance::Independent),
        "iterative" => Ok(Provenance::Iterative),
        other => Err(CliError::validation(format!(
            "provenance must be `independent` or `iterative`, got `{other}`"
        ))),
    }
}

fn rows_file_name(strategy_file: &str) -> String {
    let stem = strategy_file.strip_suffix(".json").unwrap_or(strategy_file);
    format!("{stem}_rows.csv")
}

/// In-sample coefficient of determination of the strategy's regressor.
fn regressor_r2(strategy: &Strategy, rows: &RegressionSet) -> Option<f64> {
    let Strategy::Lal(lal) = strategy else {
        return None;
    };
    let n = rows.deltas.len() as f64;
    let mean = rows.deltas.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for (state, &delta) in rows.states.iter().zip(&rows.deltas) {
        let predicted = lal.regressor().predict_regression(state.as_slice());
        sse += (delta - predicted).powi(2);
        sst += (delta - mean).powi(2);
    }
    (sst > 0.0).then(|| 1.0 - sse / sst)
}

pub fn build_strategy(args: &BuildArgs, global: &Global) -> Result<(), CliError> {
    let mut cfg: BuildConfig = config::read_config(&args.config)?;
    let base = config::base_dir(&args.config);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &args.provenance {
        cfg.provenance = parse_provenance(p)?;
    }
    if let Some(v) = args.tau_min {
        cfg.monte_carlo.tau_min = v;
    }
    if let Some(v) = args.tau_max {
        cfg.monte_carlo.tau_max = v;
    }
    if let Some(v) = args.q {
        cfg.monte_carlo.q = v;
    }
    if let Some(v) = args.m {
        cfg.monte_carlo.m = v;
    }
    if let Some(o) = &args.output {
        cfg.output = o.clone();
    }
    cfg.monte_carlo.seed = cfg.seed;
    cfg.validate()?;

    let out_dir = config::output_dir(
        global.output_dir.as_deref(),
        cfg.output_dir.as_deref(),
        &base,
    );
    let strategy_path = out_dir.join(&cfg.output);
    let rows_path = out_dir.join(rows_file_name(&cfg.output));
    let mut targets = vec![strategy_path.clone()];
    if cfg.export_rows {
        targets.push(rows_path.clone());
    }
    claim(&targets, global.force)?;

    // warm-start data is loaded and split up front so bad input is a
    // validation failure
    let warm = match &cfg.representative {
        Representative::ColdStart(_) => None,
        Representative::WarmStart(w) => {
            let dataset = w
                .data
                .load_dataset(&base, derive_seed(cfg.seed, &[WARM_DATA_STREAM]))?;
            if dataset.len() <= cfg.monte_carlo.tau_max + 1 {
                return Err(CliError::validation(format!(
                    "warm-start data has {} rows, too few for tau_max {}",
                    dataset.len(),
                    cfg.monte_carlo.tau_max
                )));
            }
            Some(
                split(
                    &dataset,
                    w.test_fraction,
                    derive_seed(cfg.seed, &[WARM_SPLIT_STREAM]),
                )
                .map_err(CliError::from_validation)?,
            )
        }
    };

    create_dir(&out_dir)?;
    let (strategy, rows) = with_workers(global.workers, || match (&cfg.representative, &warm) {
        (Representative::ColdStart(c), _) => build_cold_start_strategy(&ColdStartConfig {
            monte_carlo: cfg.monte_carlo.clone(),
            provenance: cfg.provenance,
            n_train: c.n_train,
            n_test: c.n_test,
            class0_fraction: c.class0_fraction,
            separation: c.separation,
        }),
        (Representative::WarmStart(_), Some((train, test))) => match cfg.provenance {
            Provenance::Independent => build_lal_independent(&cfg.monte_carlo, train, test),
            Provenance::Iterative => build_lal_iterative(&cfg.monte_carlo, train, test),
        },
        (Representative::WarmStart(_), None) => unreachable!("warm-start data is loaded above"),
    })?;

    strategy.save(&strategy_path)?;
    if cfg.export_rows {
        rows.write_csv(&rows_path)?;
    }
    let mean_delta = rows.deltas.iter().sum::<f64>() / rows.len() as f64;
    println!("strategy {} ({})", strategy_path.display(), strategy.id());
    println!("rows {} (max {})", rows.len(), cfg.monte_carlo.max_rows());
    match regressor_r2(&strategy, &rows) {
        Some(r2) => println!("regressor in-sample r2 {r2:.4}, mean delta {mean_delta:.5}"),
        None => println!("regressor fit undefined (constant deltas), mean delta {mean_delta:.5}"),
    }
    Ok(())
}

fn summary_csv(outcomes: &[StrategyOutcome], labels: &[String]) -> String {
    let mut out = String::from("budget");
    for label in labels {
        let _ = write!(out, ",{label}_mean,{label}_std");
    }
    out.push('\n');
    let budgets = &outcomes[0].curve.budgets;
    for (b, budget) in budgets.iter().enumerate() {
        let _ = write!(out, "{budget}");
        for o in outcomes {
            let _ = write!(out, ",{},{}", o.curve.mean[b], o.curve.std[b]);
        }
        out.push('\n');
    }
    out
}

pub fn run(args: &RunArgs, global: &Global) -> Result<(), CliError> {
    let mut cfg: RunConfig = config::read_config(&args.config)?;
    let base = config::base_dir(&args.config);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(m) = &args.metric {
        cfg.metric = m.parse::<Metric>().map_err(CliError::from_validation)?;
    }
    if !args.strategies.is_empty() {
        cfg.strategies = args.strategies.clone();
    }
    cfg.plot |= args.plot;

    let data = cfg.data.load(&base, cfg.test_fraction)?;
    cfg.validate(&data)?;
    let named = cfg.load_strategies(&base)?;

    let out_dir = config::output_dir(
        global.output_dir.as_deref(),
        cfg.output_dir.as_deref(),
        &base,
    );
    let curve_path = |label: &str, ext: &str| out_dir.join(format!("curve_{label}.{ext}"));
    let selections_path = |label: &str| out_dir.join(format!("selections_{label}.csv"));
    let mut targets = vec![out_dir.join("summary.csv"), out_dir.join("summary.json")];
    for s in &named {
        targets.push(curve_path(&s.label, "csv"));
        targets.push(curve_path(&s.label, "json"));
        targets.push(selections_path(&s.label));
    }
    if cfg.plot {
        targets.push(out_dir.join("curves.svg"));
    }
    claim(&targets, global.force)?;
    create_dir(&out_dir)?;

    let strategies: Vec<Strategy> = named.iter().map(|s| s.strategy.clone()).collect();
    let al = lal_core::harness::AlConfig {
        budget: cfg.budget,
        metric: cfg.metric,
        start: cfg.start,
        classifier: cfg.classifier.clone(),
    };
    let outcomes = with_workers(global.workers, || {
        run_repeated(&data, &strategies, &al, cfg.repetitions, cfg.seed)
    })?;

    let labels: Vec<String> = named.iter().map(|s| s.label.clone()).collect();
    let mut summary = Vec::new();
    for (s, o) in named.iter().zip(&outcomes) {
        o.curve.write_csv(curve_path(&s.label, "csv"))?;
        o.curve.write_json(curve_path(&s.label, "json"))?;
        write(&selections_path(&s.label), &selections_csv(&o.selections))?;
        let last = o.curve.budgets.len() - 1;
        summary.push(json!({
            "label": s.label,
            "strategy": s.strategy.id(),
            "final_mean": o.curve.mean[last],
            "final_std": o.curve.std[last],
            "mean_over_budgets": o.curve.mean.iter().sum::<f64>() / o.curve.mean.len() as f64,
        }));
        println!(
            "{:<24} {} after {} queries: {:.4} +- {:.4}",
            s.label, cfg.metric, cfg.budget, o.curve.mean[last], o.curve.std[last]
        );
    }
    write(
        &out_dir.join("summary.csv"),
        &summary_csv(&outcomes, &labels),
    )?;
    let summary = json!({
        "dataset": data.name(),
        "metric": cfg.metric,
        "budget": cfg.budget,
        "repetitions": cfg.repetitions,
        "seed": cfg.seed,
        "strategies": summary,
    });
    write(
        &out_dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).map_err(|e| CliError::runtime(e.to_string()))?,
    )?;
    if cfg.plot {
        let series: Vec<Series> = named
            .iter()
            .zip(&outcomes)
            .map(|(s, o)| Series {
                name: s.label.clone(),
                points: o
                    .curve
                    .budgets
                    .iter()
                    .map(|&b| b as f64)
                    .zip(o.curve.mean.iter().copied())
                    .collect(),
            })
            .collect();
        let svg = line_chart(&data.name(), "queries", &cfg.metric.to_string(), &series);
        write(&out_dir.join("curves.svg"), &svg)?;
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

pub fn motivate(args: &MotivateArgs, global: &Global) -> Result<(), CliError> {
    let (mut experiment, mut seed, configured_dir, base) = match &args.config {
        Some(path) => {
            let c: MotivateConfig = config::read_config(path)?;
            (
                c.experiment,
                Some(c.seed),
                c.output_dir,
                config::base_dir(path),
            )
        }
        None => (MotivationConfig::default(), None, None, PathBuf::from(".")),
    };
    if args.balanced {
        experiment.balanced = true;
    }
    if args.unbalanced {
        experiment.balanced = false;
    }
    if let Some(r) = args.reps {
        experiment.repetitions = r;
    }
    if let Some(b) = args.bins {
        experiment.n_bins = b;
    }
    if args.seed.is_some() {
        seed = args.seed;
    }
    let seed = seed.ok_or_else(|| {
        CliError::validation("a seed is required (--seed or the config's `seed`)")
    })?;
    if experiment.repetitions == 0 || experiment.n_bins == 0 {
        return Err(CliError::validation("reps and bins must be positive"));
    }
    if experiment.pool_size < 3 || experiment.test_size == 0 {
        return Err(CliError::validation(
            "pool_size must be at least 3 and test_size positive",
        ));
    }

    let out_dir = config::output_dir(
        global.output_dir.as_deref(),
        configured_dir.as_deref(),
        &base,
    );
    let stem = if experiment.balanced {
        "motivation_balanced"
    } else {
        "motivation_unbalanced"
    };
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));
    let svg_path = out_dir.join(format!("{stem}.svg"));
    let mut targets = vec![csv_path.clone(), json_path.clone()];
    if args.svg {
        targets.push(svg_path.clone());
    }
    claim(&targets, global.force)?;
    create_dir(&out_dir)?;

    let bins = with_workers(global.workers, || motivation_experiment(&experiment, seed))?;
    let mut csv = String::from("p0_bin,mean_delta\n");
    for line in motivation_csv(&bins).lines().skip(1) {
        let mut fields = line.split(',');
        let _ = writeln!(
            csv,
            "{},{}",
            fields.next().unwrap_or(""),
            fields.next().unwrap_or("")
        );
    }
    write(&csv_path, &csv)?;
    let report =
        json!({ "seed": seed, "config": experiment, "bins": bins, "peak": peak_center(&bins) });
    write(
        &json_path,
        &serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?,
    )?;
    if args.svg {
        let points = bins
            .iter()
            .filter_map(|b| b.mean_delta.map(|d| (b.center, d)))
            .collect();
        let svg = line_chart(
            stem,
            "p0",
            "mean delta",
            &[Series {
                name: stem.into(),
                points,
            }],
        );
        write(&svg_path, &svg)?;
    }
    match peak_center(&bins) {
        Some(p) => println!("peak p0 bin center {p}"),
        None => println!("no non-empty bins"),
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs, global: &Global) -> Result<(), CliError> {
    if args.strategy.is_none() && args.traces.is_empty() {
        return Err(CliError::validation(
            "nothing to analyze: pass --strategy and/or --traces",
        ));
    }
    if args.bins == 0 {
        return Err(CliError::validation("bins must be positive"));
    }
    let report = match &args.strategy {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::validation(format!(
                    "strategy file {} does not exist",
                    path.display()
                )));
            }
            let strategy = Strategy::load(path).map_err(CliError::from_validation)?;
            Some(regressor_importance_report(&strategy).map_err(CliError::from_validation)?)
        }
        None => None,
    };
    let mut traces = Vec::new();
    for path in &args.traces {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read traces {}: {e}", path.display()))
        })?;
        let parsed = parse_selections_csv(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        traces.push((stem, parsed));
    }

    let out_dir = config::output_dir(global.output_dir.as_deref(), None, Path::new("."));
    let mut targets = Vec::new();
    if report.is_some() {
        targets.push(out_dir.join("importance.csv"));
        if args.svg {
            targets.push(out_dir.join("importance.svg"));
        }
    }
    for (stem, _) in &traces {
        targets.push(out_dir.join(format!("histogram_{stem}.csv")));
        if args.svg {
            targets.push(out_dir.join(format!("histogram_{stem}.svg")));
        }
    }
    claim(&targets, global.force)?;
    create_dir(&out_dir)?;

    if let Some(report) = report {
        for (name, value) in &report {
            println!("{name:<28} {value:.4}");
        }
        write(&out_dir.join("importance.csv"), &importance_csv(&report))?;
        if args.svg {
            let names: Vec<String> = report.iter().map(|(n, _)| n.clone()).collect();
            let values: Vec<f64> = report.iter().map(|(_, v)| *v).collect();
            write(
                &out_dir.join("importance.svg"),
                &bar_chart("regressor feature importance", &names, &values),
            )?;
        }
    }
    for (stem, parsed) in &traces {
        let h = probability_histogram(parsed, args.bins)?;
        let (lo, hi) = h.bin_range(h.mode_bin());
        println!(
            "{stem}: {} selections, mode [{lo:.2}, {hi:.2}), mean {:.4}, std {:.4}",
            h.total(),
            h.mean,
            h.std
        );
        write(&out_dir.join(format!("histogram_{stem}.csv")), &h.to_csv())?;
        if args.svg {
            let names: Vec<String> = (0..h.n_bins())
                .map(|b| {
                    let (lo, hi) = h.bin_range(b);
                    format!("{lo:.2}-{hi:.2}")
                })
                .collect();
            let values: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
            write(
                &out_dir.join(format!("histogram_{stem}.svg")),
                &bar_chart(stem, &names, &values),
            )?;
        }
    }
    Ok(())
}
