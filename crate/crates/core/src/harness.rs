//! The active-learning loop, paired repeated experiments, the logistic
//! error-reduction experiment, and selection/importance analyses.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{
    gaussian_clouds, init_cold_start, init_warm_start, split, Dataset, GeneratorSpec, PoolState,
};
use crate::error::{Error, Result};
use crate::forest::{
    classifier_config, predict_logistic, train_logistic, ForestConfig, LogisticModel,
};
use crate::metrics::Metric;
use crate::seed::{derive_seed, par_map, rng_from};
use crate::state_features::{train_classifier, FEATURE_SCHEMA};
use crate::strategies::Strategy;

const CLASSIFIER_STREAM: u64 = 1;
const SELECT_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const DATA_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// One labeled point per class.
    Cold,
    /// `n0` random labeled points containing both classes.
    Warm { n0: usize },
}

impl StartMode {
    pub fn initial_size(self) -> usize {
        match self {
            StartMode::Cold => 2,
            StartMode::Warm { n0 } => n0,
        }
    }

    pub fn init(self, train: &Dataset, seed: u64) -> Result<PoolState> {
        match self {
            StartMode::Cold => init_cold_start(train, seed),
            StartMode::Warm { n0 } => init_warm_start(train, n0, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlConfig {
    /// Number of queries.
    pub budget: usize,
    pub metric: Metric,
    pub start: StartMode,
    #[serde(deserialize_with = "classifier_config")]
    pub classifier: ForestConfig,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            budget: 50,
            metric: Metric::Accuracy,
            start: StartMode::Cold,
            classifier: ForestConfig::classifier(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub iteration: usize,
    pub index: usize,
    /// Predicted class-0 probability of the chosen point when it was chosen.
    pub psi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub records: Vec<SelectionRecord>,
}

impl SelectionTrace {
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.psi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlRun {
    /// Metric after 0, 1, ..., budget queries.
    pub trace: Vec<f64>,
    pub selections: SelectionTrace,
    pub final_pool: PoolState,
}

/// Initializes the pool per `config.start` and runs the loop.
pub fn run_al(
    train: &Dataset,
    test: &Dataset,
    strategy: &Strategy,
    config: &AlConfig,
    seed: u64,
) -> Result<AlRun> {
    let pool = config
        .start
        .init(train, derive_seed(seed, &[INIT_STREAM]))?;
    run_al_from(train, test, strategy, pool, config, seed)
}

/// Runs `budget` iterations from `pool`: train on the labeled set,
/// evaluate on `test`, query the strategy's choice and reveal its label.
/// The classifier is retrained from scratch every iteration with the same
/// seed.
pub fn run_al_from(
    train: &Dataset,
    test: &Dataset,
    strategy: &Strategy,
    mut pool: PoolState,
    config: &AlConfig,
    seed: u64,
) -> Result<AlRun> {
    if config.budget > pool.unlabeled().len() {
        return Err(Error::invalid(format!(
            "budget {} exceeds the unlabeled pool of {}",
            config.budget,
            pool.unlabeled().len()
        )));
    }
    let clf_seed = derive_seed(seed, &[CLASSIFIER_STREAM]);
    let mut rng = rng_from(seed, &[SELECT_STREAM]);
    let mut trace = Vec::with_capacity(config.budget + 1);
    let mut selections = SelectionTrace::default();
    for t in 0..=config.budget {
        let model = train_classifier(train, pool.labeled(), &config.classifier, clf_seed)?;
        let p0: Vec<f64> = test.rows().map(|x| model.predict_proba(x)).collect();
        trace.push(config.metric.evaluate(&p0, test.labels())?);
        if t == config.budget {
            break;
        }
        let pick = strategy.select(&model, &pool, train, &mut rng)?;
        selections.records.push(SelectionRecord {
            iteration: t,
            index: pick,
            psi: model.predict_proba(train.row(pick)),
        });
        pool.query(pick)?;
    }
    Ok(AlRun {
        trace,
        selections,
        final_pool: pool,
    })
}

/// Where each repetition's train/test pair comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentData {
    /// A fresh synthetic dataset per repetition, split into train/test.
    Generated {
        spec: GeneratorSpec,
        test_fraction: f64,
    },
    /// One dataset, re-split per repetition.
    Fixed {
        dataset: Dataset,
        test_fraction: f64,
    },
}

impl ExperimentData {
    pub fn name(&self) -> String {
        match self {
            ExperimentData::Generated { spec, .. } => match spec {
                GeneratorSpec::GaussianClouds { .. } => "gaussian-clouds".into(),
                GeneratorSpec::Checkerboard { k, .. } => format!("checkerboard-{k}x{k}"),
                GeneratorSpec::Banana { .. } => "banana".into(),
            },
            ExperimentData::Fixed { dataset, .. } => dataset.name().to_string(),
        }
    }

    fn test_fraction(&self) -> f64 {
        match self {
            ExperimentData::Generated { test_fraction, .. }
            | ExperimentData::Fixed { test_fraction, .. } => *test_fraction,
        }
    }

    /// Size of the training part of each repetition.
    pub fn train_size(&self) -> usize {
        let n = match self {
            ExperimentData::Generated { spec, .. } => spec.len(),
            ExperimentData::Fixed { dataset, .. } => dataset.len(),
        };
        n - (n as f64 * self.test_fraction()).round() as usize
    }

    pub fn draw(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let split_seed = derive_seed(seed, &[1]);
        match self {
            ExperimentData::Generated {
                spec,
                test_fraction,
            } => {
                let d = spec.generate(derive_seed(seed, &[0]))?;
                split(&d, *test_fraction, split_seed)
            }
            ExperimentData::Fixed {
                dataset,
                test_fraction,
            } => split(dataset, *test_fraction, split_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: String,
    pub dataset: String,
    pub metric: Metric,
    /// Queries made before each evaluation (`0..=budget`).
    pub budgets: Vec<usize>,
    /// Labeled-set size at each evaluation.
    pub labeled_sizes: Vec<usize>,
    pub mean: Vec<f64>,
    /// Sample standard deviation across repetitions (0 for one repetition).
    pub std: Vec<f64>,
    pub traces: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub repetition_seeds: Vec<u64>,
}

impl LearningCurve {
    pub fn from_traces(
        strategy: &str,
        dataset: &str,
        metric: Metric,
        initial_size: usize,
        traces: Vec<Vec<f64>>,
        master_seed: u64,
        repetition_seeds: Vec<u64>,
    ) -> Result<Self> {
        let len = traces.first().map_or(0, Vec::len);
        if len == 0 || traces.iter().any(|t| t.len() != len) {
            return Err(Error::invalid(
                "traces must be non-empty and of equal length",
            ));
        }
        let (mean, std) = aggregate(&traces);
        Ok(LearningCurve {
            strategy: strategy.into(),
            dataset: dataset.into(),
            metric,
            budgets: (0..len).collect(),
            labeled_sizes: (0..len).map(|b| initial_size + b).collect(),
            mean,
            std,
            traces,
            master_seed,
            repetition_seeds,
        })
    }

    pub fn repetitions(&self) -> usize {
        self.traces.len()
    }

    /// Mean metric after `budget` queries.
    pub fn mean_at(&self, budget: usize) -> f64 {
        self.mean[budget]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("budget,mean,std");
        for r in 0..self.traces.len() {
            let _ = write!(out, ",rep_{r}");
        }
        out.push('\n');
        for b in 0..self.budgets.len() {
            let _ = write!(out, "{},{},{}", self.budgets[b], self.mean[b], self.std[b]);
            for t in &self.traces {
                let _ = write!(out, ",{}", t[b]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &serde_json::to_string_pretty(self)?)
    }
}

/// Per-column mean and sample standard deviation.
pub fn aggregate(traces: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let r = traces.len() as f64;
    let len = traces.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for b in 0..len {
        let m = traces.iter().map(|t| t[b]).sum::<f64>() / r;
        mean[b] = m;
        if traces.len() > 1 {
            let ss: f64 = traces.iter().map(|t| (t[b] - m) * (t[b] - m)).sum();
            std[b] = (ss / (r - 1.0)).sqrt();
        }
    }
    (mean, std)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub curve: LearningCurve,
    /// One trace per repetition.
    pub selections: Vec<SelectionTrace>,
}

/// Runs every strategy on every repetition. Repetition `r` draws its data,
/// initial labeled set and classifier seed from `(master_seed, r)`, and all
/// strategies share them.
pub fn run_repeated(
    data: &ExperimentData,
    strategies: &[Strategy],
    config: &AlConfig,
    repetitions: usize,
    master_seed: u64,
) -> Result<Vec<StrategyOutcome>> {
    if repetitions == 0 {
        return Err(Error::invalid("need at least one repetition"));
    }
    if strategies.is_empty() {
        return Err(Error::invalid("no strategies to run"));
    }
    let seeds: Vec<u64> = (0..repetitions)
        .map(|r| derive_seed(master_seed, &[r as u64]))
        .collect();
    let setups = par_map(repetitions, |r| -> Result<(Dataset, Dataset, PoolState)> {
        let (train, test) = data.draw(derive_seed(seeds[r], &[DATA_STREAM]))?;
        let pool = config
            .start
            .init(&train, derive_seed(seeds[r], &[INIT_STREAM]))?;
        Ok((train, test, pool))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let s = strategies.len();
    let runs = par_map(repetitions * s, |job| {
        let (r, k) = (job / s, job % s);
        let (train, test, pool) = &setups[r];
        run_al_from(train, test, &strategies[k], pool.clone(), config, seeds[r])
    });
    let mut per_strategy: Vec<(Vec<Vec<f64>>, Vec<SelectionTrace>)> =
        vec![(Vec::new(), Vec::new()); s];
    for (job, run) in runs.into_iter().enumerate() {
        let run = run?;
        per_strategy[job % s].0.push(run.trace);
        per_strategy[job % s].1.push(run.selections);
    }

    let dataset = data.name();
    per_strategy
        .into_iter()
        .zip(strategies)
        .map(|((traces, selections), strategy)| {
            Ok(StrategyOutcome {
                curve: LearningCurve::from_traces(
                    strategy.id(),
                    &dataset,
                    config.metric,
                    config.start.initial_size(),
                    traces,
                    master_seed,
                    seeds.clone(),
                )?,
                selections,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotivationConfig {
    /// Equal class sizes when true, class 0 twice class 1 otherwise.
    pub balanced: bool,
    pub repetitions: usize,
    pub n_bins: usize,
    /// Points per repetition, including the two initially labeled ones.
    pub pool_size: usize,
    pub test_size: usize,
    pub separation: f64,
    pub learn_rate: f64,
    pub iterations: usize,
}

impl Default for MotivationConfig {
    fn default() -> Self {
        MotivationConfig {
            balanced: true,
            repetitions: 10_000,
            n_bins: 20,
            pool_size: 102,
            test_size: 5000,
            separation: 2.5,
            learn_rate: 0.1,
            iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotivationBin {
    pub center: f64,
    pub count: u64,
    /// `None` for empty bins.
    pub mean_delta: Option<f64>,
}

fn bin_of(p: f64, n_bins: usize) -> usize {
    ((p * n_bins as f64).floor() as usize).min(n_bins - 1)
}

fn logistic_zero_one(model: &LogisticModel, test: &Dataset) -> f64 {
    let wrong = test
        .rows()
        .zip(test.labels())
        .filter(|(x, &y)| (model.logit(x) > 0.0) != (y == 1))
        .count();
    wrong as f64 / test.len() as f64
}

/// Average 0/1 test-loss reduction from labeling each pool point after a
/// one-per-class start, as a function of the start classifier's class-0
/// probability for that point.
pub fn motivation_experiment(config: &MotivationConfig, seed: u64) -> Result<Vec<MotivationBin>> {
    if config.n_bins == 0 || config.repetitions == 0 {
        return Err(Error::invalid("need at least one bin and one repetition"));
    }
    if config.pool_size < 3 {
        return Err(Error::invalid("pool_size must be at least 3"));
    }
    let fraction = if config.balanced { 0.5 } else { 2.0 / 3.0 };
    let per_rep = par_map(config.repetitions, |r| -> Result<(Vec<f64>, Vec<u64>)> {
        let rs = derive_seed(seed, &[r as u64]);
        let data = gaussian_clouds(
            config.pool_size,
            fraction,
            config.separation,
            2,
            derive_seed(rs, &[0]),
        )?;
        let test = gaussian_clouds(
            config.test_size,
            fraction,
            config.separation,
            2,
            derive_seed(rs, &[1]),
        )?;
        let pool = init_cold_start(&data, derive_seed(rs, &[2]))?;
        let fit = |indices: &[usize]| {
            let sub = data.subset(indices, "l");
            train_logistic(
                sub.features(),
                2,
                sub.labels(),
                config.learn_rate,
                config.iterations,
            )
        };
        let base = fit(pool.labeled())?;
        let base_loss = logistic_zero_one(&base, &test);
        let mut sums = vec![0.0; config.n_bins];
        let mut counts = vec![0u64; config.n_bins];
        let mut labeled = pool.labeled().to_vec();
        for &x in pool.unlabeled() {
            let p0 = 1.0 - predict_logistic(&base, data.row(x));
            labeled.push(x);
            let delta = base_loss - logistic_zero_one(&fit(&labeled)?, &test);
            labeled.pop();
            let b = bin_of(p0, config.n_bins);
            sums[b] += delta;
            counts[b] += 1;
        }
        Ok((sums, counts))
    });

    let mut sums = vec![0.0; config.n_bins];
    let mut counts = vec![0u64; config.n_bins];
    for rep in per_rep {
        let (s, c) = rep?;
        for b in 0..config.n_bins {
            sums[b] += s[b];
            counts[b] += c[b];
        }
    }
    Ok((0..config.n_bins)
        .map(|b| MotivationBin {
            center: (b as f64 + 0.5) / config.n_bins as f64,
            count: counts[b],
            mean_delta: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
        })
        .collect())
}

/// Center of the non-empty bin with the largest mean reduction.
pub fn peak_center(bins: &[MotivationBin]) -> Option<f64> {
    bins.iter()
        .filter_map(|b| b.mean_delta.map(|d| (b.center, d)))
        .fold(None, |best: Option<(f64, f64)>, (c, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((c, d)),
        })
        .map(|(c, _)| c)
}

pub fn motivation_csv(bins: &[MotivationBin]) -> String {
    let mut out = String::from("p0_bin,mean_delta,count\n");
    for b in bins {
        let delta = b.mean_delta.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", b.center, delta, b.count);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<usize>,
    /// Mean and population standard deviation of the pooled values.
    pub mean: f64,
    pub std: f64,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Index of the fullest bin (first among ties).
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (b, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = b;
            }
        }
        best
    }

    pub fn bin_range(&self, b: usize) -> (f64, f64) {
        let w = 1.0 / self.n_bins() as f64;
        (b as f64 * w, (b + 1) as f64 * w)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (b, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bin_range(b);
            let _ = writeln!(out, "{lo},{hi},{c}");
        }
        out
    }
}

/// Pooled histogram over `[0, 1]` of the chosen points' class-0
/// probabilities.
pub fn probability_histogram(traces: &[SelectionTrace], n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    let values: Vec<f64> = traces
        .iter()
        .flat_map(SelectionTrace::probabilities)
        .collect();
    let mut counts = vec![0; n_bins];
    for &p in &values {
        counts[bin_of(p.clamp(0.0, 1.0), n_bins)] += 1;
    }
    let (mean, std) = if values.is_empty() {
        (0.0, 0.0)
    } else {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    Ok(Histogram { counts, mean, std })
}

/// Regressor feature importances joined with the feature names.
pub fn regressor_importance_report(strategy: &Strategy) -> Result<Vec<(String, f64)>> {
    let Strategy::Lal(lal) = strategy else {
        return Err(Error::invalid(format!(
            "strategy `{}` has no regressor to report on",
            strategy.id()
        )));
    };
    Ok(lal
        .feature_schema()
        .iter()
        .cloned()
        .zip(lal.regressor().feature_importances())
        .collect())
}

pub fn importance_csv(report: &[(String, f64)]) -> String {
    let mut out = String::from("feature,importance\n");
    for (name, v) in report {
        let _ = writeln!(out, "{name},{v}");
    }
    out
}

pub fn selections_csv(traces: &[SelectionTrace]) -> String {
    let mut out = String::from("repetition,iteration,index,psi\n");
    for (r, t) in traces.iter().enumerate() {
        for rec in &t.records {
            let _ = writeln!(out, "{r},{},{},{}", rec.iteration, rec.index, rec.psi);
        }
    }
    out
}

/// Parses [`selections_csv`] output back into one trace per repetition.
pub fn parse_selections_csv(text: &str) -> Result<Vec<SelectionTrace>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "repetition,iteration,index,psi" => {}
        _ => {
            return Err(Error::invalid(
                "selection trace header must be `repetition,iteration,index,psi`",
            ))
        }
    }
    let mut traces: Vec<SelectionTrace> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::invalid(format!("malformed selection trace row {}", n + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad());
        }
        let rep: usize = fields[0].parse().map_err(|_| bad())?;
        let record = SelectionRecord {
            iteration: fields[1].parse().map_err(|_| bad())?,
            index: fields[2].parse().map_err(|_| bad())?,
            psi: fields[3].parse().map_err(|_| bad())?,
        };
        if traces.len() <= rep {
            traces.resize_with(rep + 1, SelectionTrace::default);
        }
        traces[rep].records.push(record);
    }
    Ok(traces)
}

/// Names of the learning-state features, for reports.
pub fn feature_names() -> [&'static str; 7] {
    FEATURE_SCHEMA
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian_clouds;

    fn small_al(budget: usize) -> AlConfig {
        AlConfig {
            budget,
            classifier: ForestConfig::classifier().with_trees(10),
            ..AlConfig::default()
        }
    }

    fn data() -> (Dataset, Dataset) {
        (
            gaussian_clouds(60, 0.5, 2.0, 2, 1).unwrap(),
            gaussian_clouds(100, 0.5, 2.0, 2, 2).unwrap(),
        )
    }

    #[test]
    fn zero_budget_gives_one_point() {
        let (train, test) = data();
        let run = run_al(&train, &test, &Strategy::Random, &small_al(0), 3).unwrap();
        assert_eq!(run.trace.len(), 1);
        assert!(run.selections.records.is_empty());
    }

    #[test]
    fn loop_bookkeeping() {
        let (train, test) = data();
        for strategy in [Strategy::Random, Strategy::Uncertainty] {
            let run = run_al(&train, &test, &strategy, &small_al(20), 5).unwrap();
            assert_eq!(run.trace.len(), 21);
            assert_eq!(run.final_pool.labeled().len(), 22);
            assert_eq!(run.final_pool.unlabeled().len(), 38);
            let mut idx: Vec<usize> = run.selections.records.iter().map(|r| r.index).collect();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 20);
        }
        assert!(run_al(&train, &test, &Strategy::Random, &small_al(59), 5).is_err());
    }

    #[test]
    fn random_runs_are_reproducible() {
        let (train, test) = data();
        let a = run_al(&train, &test, &Strategy::Random, &small_al(10), 9).unwrap();
        let b = run_al(&train, &test, &Strategy::Random, &small_al(10), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_budget_labels_everything() {
        let (train, test) = data();
        let config = small_al(58);
        let a = run_al(&train, &test, &Strategy::Random, &config, 4).unwrap();
        let b = run_al(&train, &test, &Strategy::Uncertainty, &config, 4).unwrap();
        assert!(a.final_pool.unlabeled().is_empty());
        let mut la = a.final_pool.labeled().to_vec();
        let mut lb = b.final_pool.labeled().to_vec();
        la.sort_unstable();
        lb.sort_unstable();
        assert_eq!(la, lb);
    }

    #[test]
    fn repeated_runs_pair_and_aggregate() {
        let data = ExperimentData::Generated {
            spec: GeneratorSpec::GaussianClouds {
                n: 80,
                class0_fraction: 0.5,
                separation: 2.0,
                dim: 2,
            },
            test_fraction: 0.5,
        };
        let out = run_repeated(
            &data,
            &[Strategy::Random, Strategy::Uncertainty],
            &small_al(5),
            3,
            7,
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        for o in &out {
            assert_eq!(o.curve.repetitions(), 3);
            assert_eq!(o.curve.budgets, vec![0, 1, 2, 3, 4, 5]);
            assert_eq!(o.curve.labeled_sizes[0], 2);
            let (mean, std) = aggregate(&o.curve.traces);
            assert_eq!(mean, o.curve.mean);
            assert_eq!(std, o.curve.std);
        }
        // shared start: identical budget-0 evaluations
        for r in 0..3 {
            assert_eq!(out[0].curve.traces[r][0], out[1].curve.traces[r][0]);
        }

        let one = run_repeated(&data, &[Strategy::Random], &small_al(5), 1, 7).unwrap();
        assert_eq!(one[0].curve.mean, one[0].curve.traces[0]);
        assert!(one[0].curve.std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn aggregate_of_constant_traces() {
        let (mean, std) = aggregate(&[vec![0.7, 0.7], vec![0.7, 0.7], vec![0.7, 0.7]]);
        assert!(mean.iter().all(|&m| (m - 0.7).abs() < 1e-12));
        assert!(std.iter().all(|&s| s.abs() < 1e-12));
    }

    #[test]
    fn curve_csv_layout() {
        let c = LearningCurve::from_traces(
            "random",
            "d",
            Metric::Accuracy,
            2,
            vec![vec![0.5, 0.75], vec![0.5, 0.25]],
            1,
            vec![10, 11],
        )
        .unwrap();
        assert_eq!(
            c.to_csv(),
            "budget,mean,std,rep_0,rep_1\n0,0.5,0,0.5,0.5\n1,0.5,0.3535533905932738,0.75,0.25\n"
        );
    }

    #[test]
    fn motivation_bins_are_bounded() {
        let config = MotivationConfig {
            repetitions: 50,
            test_size: 500,
            pool_size: 30,
            ..MotivationConfig::default()
        };
        let bins = motivation_experiment(&config, 3).unwrap();
        assert_eq!(bins.len(), 20);
        let total: u64 = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 50 * 28);
        for b in &bins {
            if let Some(d) = b.mean_delta {
                assert!((-1.0..=1.0).contains(&d));
            }
        }
        assert_eq!(bins, motivation_experiment(&config, 3).unwrap());
        assert!(motivation_csv(&bins).starts_with("p0_bin,mean_delta,count\n"));
    }

    #[test]
    fn peak_ignores_empty_bins() {
        let bins = [
            MotivationBin {
                center: 0.25,
                count: 3,
                mean_delta: Some(0.1),
            },
            MotivationBin {
                center: 0.5,
                count: 0,
                mean_delta: None,
            },
            MotivationBin {
                center: 0.75,
                count: 3,
                mean_delta: Some(0.2),
            },
        ];
        assert_eq!(peak_center(&bins), Some(0.75));
        assert_eq!(peak_center(&bins[1..2]), None);
    }

    #[test]
    fn histogram_counts() {
        let trace = |ps: &[f64]| SelectionTrace {
            records: ps
                .iter()
                .enumerate()
                .map(|(i, &psi)| SelectionRecord {
                    iteration: i,
                    index: i,
                    psi,
                })
                .collect(),
        };
        let h =
            probability_histogram(&[trace(&[0.0, 0.5, 0.52, 1.0]), trace(&[0.49])], 10).unwrap();
        assert_eq!(h.total(), 5);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[4], 1);
        assert_eq!(h.counts[5], 2);
        assert_eq!(h.counts[9], 1);
        assert_eq!(h.mode_bin(), 5);
        let empty = probability_histogram(&[], 4).unwrap();
        assert_eq!(empty.counts, vec![0; 4]);
        assert!(probability_histogram(&[], 0).is_err());
    }

    #[test]
    fn selections_csv_round_trip() {
        let traces = vec![
            SelectionTrace {
                records: vec![SelectionRecord {
                    iteration: 0,
                    index: 4,
                    psi: 0.25,
                }],
            },
            SelectionTrace {
                records: vec![
                    SelectionRecord {
                        iteration: 0,
                        index: 1,
                        psi: 0.5,
                    },
                    SelectionRecord {
                        iteration: 1,
                        index: 9,
                        psi: 0.125,
                    },
                ],
            },
        ];
        assert_eq!(
            parse_selections_csv(&selections_csv(&traces)).unwrap(),
            traces
        );
        assert!(parse_selections_csv("a,b\n").is_err());
        assert!(parse_selections_csv("repetition,iteration,index,psi\n0,1,x,0.5\n").is_err());
    }

    #[test]
    fn importance_report_needs_lal() {
        assert!(regressor_importance_report(&Strategy::Random).is_err());
    }
}
