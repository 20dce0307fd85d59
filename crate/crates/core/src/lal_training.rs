//! Monte-Carlo collection of (learning state, error reduction) pairs and
//! the two strategy builders.
//!
//! One *cell* `(tau, q)` partitions the representative training set into
//! `tau` labeled points and an unlabeled remainder, trains the classifier,
//! and then, for up to `m` pool candidates drawn without replacement,
//! measures how much the test loss drops when that candidate's true label
//! is added. Cells are seeded from `(seed, tau, q)` and their rows are
//! concatenated in `(tau, q, m)` order, so builds are reproducible for any
//! worker count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{gaussian_clouds, one_per_class, Dataset, PoolState};
use crate::error::{Error, Result};
use crate::forest::{
    classifier_config, regressor_config, train_forest, ForestConfig, ForestModel, Mode,
};
use crate::metrics::Metric;
use crate::seed::{derive_seed, par_map, rng_from};
use crate::state_features::{
    assemble_state, classifier_state, datapoint_features, feature_schema, train_classifier,
    LearningState, STATE_DIM,
};
use crate::strategies::{LalStrategy, Provenance, Strategy, TrainingMetadata};

const REGRESSOR_STREAM: u64 = 0x5245_4752;
const CLASSIFIER_STREAM: u64 = 0x434C_4153;
const DATA_STREAM: u64 = 0x4441_5441;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonteCarloConfig {
    pub tau_min: usize,
    pub tau_max: usize,
    /// Initializations per labeled-set size.
    pub q: usize,
    /// Candidate draws per initialization.
    pub m: usize,
    #[serde(deserialize_with = "classifier_config")]
    pub classifier: ForestConfig,
    #[serde(deserialize_with = "regressor_config")]
    pub regressor: ForestConfig,
    pub test_loss: Metric,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            tau_min: 2,
            tau_max: 32,
            q: 10,
            m: 10,
            classifier: ForestConfig::classifier(),
            regressor: ForestConfig::regressor(),
            test_loss: Metric::ZeroOne,
            seed: 0,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_min < 2 || self.tau_min > self.tau_max {
            return Err(Error::invalid(format!(
                "labeled-set sizes must satisfy 2 <= tau_min <= tau_max, got {}..={}",
                self.tau_min, self.tau_max
            )));
        }
        if self.q == 0 || self.m == 0 {
            return Err(Error::invalid("q and m must be at least 1"));
        }
        if self.classifier.mode != Mode::Classification {
            return Err(Error::invalid(
                "classifier config must be in classification mode",
            ));
        }
        if self.regressor.mode != Mode::Regression {
            return Err(Error::invalid(
                "regressor config must be in regression mode",
            ));
        }
        self.classifier.validate()?;
        self.regressor.validate()
    }

    /// Number of labeled-set sizes `T`.
    pub fn sizes(&self) -> usize {
        self.tau_max + 1 - self.tau_min
    }

    pub fn max_rows(&self) -> usize {
        self.q * self.m * self.sizes()
    }
}

/// Which cell produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowTag {
    pub tau: usize,
    pub q: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegressionSet {
    pub states: Vec<LearningState>,
    pub deltas: Vec<f64>,
    pub tags: Vec<RowTag>,
}

impl RegressionSet {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn append(&mut self, other: RegressionSet) {
        self.states.extend(other.states);
        self.deltas.extend(other.deltas);
        self.tags.extend(other.tags);
    }

    /// Row-major state matrix.
    pub fn state_matrix(&self) -> Vec<f64> {
        self.states.iter().flat_map(|s| s.0).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            let cols: Vec<String> = (0..STATE_DIM).map(|j| format!("xi_{j}")).collect();
            writeln!(w, "{},delta,tau,q,m", cols.join(","))?;
            for ((s, d), t) in self.states.iter().zip(&self.deltas).zip(&self.tags) {
                for v in s.0 {
                    write!(w, "{v},")?;
                }
                writeln!(w, "{d},{},{},{}", t.tau, t.q, t.m)?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }
}

/// How a cell assembles its labeled set of size `tau`.
#[derive(Debug, Clone, Copy)]
pub enum SplitProcedure<'a> {
    /// One random point per class plus `tau - 2` uniformly random points.
    Random,
    /// `start` points as in `Random`, then grown to `tau` by running the
    /// active-learning loop with `strategy`.
    Grow {
        strategy: &'a Strategy,
        start: usize,
    },
}

fn random_labeled_set<R: Rng>(train: &Dataset, tau: usize, rng: &mut R) -> Result<PoolState> {
    let [a, b] = one_per_class(train, rng)?;
    let rest: Vec<usize> = (0..train.len()).filter(|&i| i != a && i != b).collect();
    let mut labeled = vec![a, b];
    labeled.extend(
        sample(rng, rest.len(), tau - 2)
            .into_iter()
            .map(|k| rest[k]),
    );
    PoolState::new(train.len(), labeled)
}

/// The labeled/unlabeled partition a cell works on.
pub fn partition(
    train: &Dataset,
    split: SplitProcedure<'_>,
    tau: usize,
    classifier: &ForestConfig,
    seed: u64,
) -> Result<PoolState> {
    if tau < 2 || tau >= train.len() {
        return Err(Error::invalid(format!(
            "labeled-set size {tau} needs 2 <= tau < {}",
            train.len()
        )));
    }
    let mut rng = rng_from(seed, &[]);
    match split {
        SplitProcedure::Random => random_labeled_set(train, tau, &mut rng),
        SplitProcedure::Grow { strategy, start } => {
            let start = start.clamp(2, tau);
            let mut pool = random_labeled_set(train, start, &mut rng)?;
            let clf_seed = derive_seed(seed, &[CLASSIFIER_STREAM]);
            while pool.labeled().len() < tau {
                let model = train_classifier(train, pool.labeled(), classifier, clf_seed)?;
                let pick = strategy.select(&model, &pool, train, &mut rng)?;
                pool.query(pick)?;
            }
            Ok(pool)
        }
    }
}

fn test_loss(model: &ForestModel, test: &Dataset, metric: Metric) -> Result<f64> {
    let p0: Vec<f64> = test.rows().map(|x| model.predict_proba(x)).collect();
    Ok(metric.as_loss(metric.evaluate(&p0, test.labels())?))
}

/// One Monte-Carlo cell: rows `(xi, delta)` for up to `m` candidates.
#[allow(clippy::too_many_arguments)]
pub fn data_monte_carlo(
    train: &Dataset,
    test: &Dataset,
    classifier: &ForestConfig,
    split: SplitProcedure<'_>,
    tau: usize,
    m: usize,
    loss: Metric,
    q_tag: usize,
    seed: u64,
) -> Result<RegressionSet> {
    let pool = partition(train, split, tau, classifier, seed)?;
    let clf_seed = derive_seed(seed, &[CLASSIFIER_STREAM]);
    let base = train_classifier(train, pool.labeled(), classifier, clf_seed)?;
    let base_loss = test_loss(&base, test, loss)?;
    let phi = classifier_state(&base, &pool, train)?;

    let candidates = pool.unlabeled();
    let mut rng = rng_from(seed, &[1]);
    let drawn: Vec<usize> = sample(&mut rng, candidates.len(), m.min(candidates.len()))
        .into_iter()
        .map(|k| candidates[k])
        .collect();

    let rows = par_map(drawn.len(), |k| -> Result<(LearningState, f64)> {
        let x = drawn[k];
        let psi = datapoint_features(&base, train.row(x));
        let mut labeled = pool.labeled().to_vec();
        labeled.push(x);
        let extended = train_classifier(train, &labeled, classifier, clf_seed)?;
        let delta = base_loss - test_loss(&extended, test, loss)?;
        Ok((assemble_state(&phi, psi), delta))
    });

    let mut set = RegressionSet::default();
    for (k, row) in rows.into_iter().enumerate() {
        let (state, delta) = row?;
        set.states.push(state);
        set.deltas.push(delta);
        set.tags.push(RowTag {
            tau,
            q: q_tag,
            m: k,
        });
    }
    Ok(set)
}

fn collect_size(
    config: &MonteCarloConfig,
    train: &Dataset,
    test: &Dataset,
    split: SplitProcedure<'_>,
    tau: usize,
) -> Result<RegressionSet> {
    let cells = par_map(config.q, |q| {
        let seed = derive_seed(config.seed, &[tau as u64, q as u64]);
        data_monte_carlo(
            train,
            test,
            &config.classifier,
            split,
            tau,
            config.m,
            config.test_loss,
            q,
            seed,
        )
    });
    let mut set = RegressionSet::default();
    for cell in cells {
        set.append(cell?);
    }
    Ok(set)
}

pub fn train_regressor(
    rows: &RegressionSet,
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    if rows.is_empty() {
        return Err(Error::invalid(
            "no Monte-Carlo rows to train the regressor on",
        ));
    }
    let config = ForestConfig {
        mode: Mode::Regression,
        ..config.clone()
    };
    train_forest(&rows.state_matrix(), STATE_DIM, &rows.deltas, &config, seed)
}

fn wrap(
    config: &MonteCarloConfig,
    rows: &RegressionSet,
    provenance: Provenance,
    representative: &Dataset,
) -> Result<Strategy> {
    let regressor = train_regressor(
        rows,
        &config.regressor,
        derive_seed(config.seed, &[REGRESSOR_STREAM]),
    )?;
    let metadata = TrainingMetadata {
        rows: rows.len(),
        tau_min: config.tau_min,
        tau_max: config.tau_max,
        q: config.q,
        m: config.m,
        test_loss: config.test_loss,
        seed: config.seed,
        representative: representative.name().to_string(),
    };
    Ok(Strategy::Lal(Box::new(LalStrategy::new(
        regressor,
        feature_schema(),
        provenance,
        Some(metadata),
    )?)))
}

/// Monte-Carlo rows from randomly assembled labeled sets for every size in
/// `tau_min..=tau_max` and every initialization.
pub fn collect_independent(
    config: &MonteCarloConfig,
    representative: &Dataset,
    test: &Dataset,
) -> Result<RegressionSet> {
    config.validate()?;
    let mut rows = RegressionSet::default();
    for tau in config.tau_min..=config.tau_max {
        rows.append(collect_size(
            config,
            representative,
            test,
            SplitProcedure::Random,
            tau,
        )?);
    }
    Ok(rows)
}

pub fn build_lal_independent(
    config: &MonteCarloConfig,
    representative: &Dataset,
    test: &Dataset,
) -> Result<(Strategy, RegressionSet)> {
    let rows = collect_independent(config, representative, test)?;
    let strategy = wrap(config, &rows, Provenance::Independent, representative)?;
    Ok((strategy, rows))
}

/// Rows for size `tau` come from labeled sets grown by the strategy learned
/// on every row collected for smaller sizes.
pub fn build_lal_iterative(
    config: &MonteCarloConfig,
    representative: &Dataset,
    test: &Dataset,
) -> Result<(Strategy, RegressionSet)> {
    config.validate()?;
    let mut rows = RegressionSet::default();
    let mut previous: Option<Strategy> = None;
    for tau in config.tau_min..=config.tau_max {
        let split = match &previous {
            None => SplitProcedure::Random,
            Some(strategy) => SplitProcedure::Grow {
                strategy,
                start: config.tau_min,
            },
        };
        rows.append(collect_size(config, representative, test, split, tau)?);
        if tau < config.tau_max {
            let seed = derive_seed(config.seed, &[REGRESSOR_STREAM, tau as u64]);
            let regressor = train_regressor(&rows, &config.regressor, seed)?;
            previous = Some(Strategy::Lal(Box::new(LalStrategy::new(
                regressor,
                feature_schema(),
                Provenance::Iterative,
                None,
            )?)));
        }
    }
    let strategy = wrap(config, &rows, Provenance::Iterative, representative)?;
    Ok((strategy, rows))
}

/// Synthetic representative data for cold-start strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColdStartConfig {
    pub monte_carlo: MonteCarloConfig,
    pub provenance: Provenance,
    pub n_train: usize,
    pub n_test: usize,
    pub class0_fraction: f64,
    pub separation: f64,
}

impl Default for ColdStartConfig {
    fn default() -> Self {
        ColdStartConfig {
            monte_carlo: MonteCarloConfig::default(),
            provenance: Provenance::Independent,
            n_train: 1000,
            n_test: 1000,
            class0_fraction: 0.5,
            separation: 2.0,
        }
    }
}

/// Two 2D Gaussian clouds drawn from the master seed as representative
/// train/test data, then the configured builder.
pub fn build_cold_start_strategy(config: &ColdStartConfig) -> Result<(Strategy, RegressionSet)> {
    let (train, test) = cold_start_data(config)?;
    match config.provenance {
        Provenance::Independent => build_lal_independent(&config.monte_carlo, &train, &test),
        Provenance::Iterative => build_lal_iterative(&config.monte_carlo, &train, &test),
    }
}

pub fn cold_start_data(config: &ColdStartConfig) -> Result<(Dataset, Dataset)> {
    let seed = config.monte_carlo.seed;
    // generators emit class 0 first; shuffle so index tie-breaks carry no class
    let gen = |n, stream| -> Result<Dataset> {
        let d = gaussian_clouds(
            n,
            config.class0_fraction,
            config.separation,
            2,
            derive_seed(seed, &[DATA_STREAM, stream]),
        )?;
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.shuffle(&mut rng_from(seed, &[DATA_STREAM, stream, 1]));
        Ok(d.subset(&order, d.name().to_string()))
    };
    Ok((gen(config.n_train, 0)?, gen(config.n_test, 1)?))
}
