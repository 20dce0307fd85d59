//! Query-selection rules behind one interface.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PoolState};
use crate::error::{Error, Result};
use crate::forest::{ForestModel, Mode};
use crate::metrics::Metric;
use crate::seed::par_map;
use crate::state_features::{assemble_state, classifier_state, datapoint_features, FEATURE_SCHEMA};

pub const STRATEGY_FORMAT: u32 = 1;

/// Entropy differences below this are ties.
const ENTROPY_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Regressor trained on randomly assembled labeled sets.
    Independent,
    /// Labeled sets grown by the previously learned strategy.
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub rows: usize,
    pub tau_min: usize,
    pub tau_max: usize,
    pub q: usize,
    pub m: usize,
    pub test_loss: Metric,
    pub seed: u64,
    pub representative: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LalStrategy {
    regressor: ForestModel,
    feature_schema: Vec<String>,
    provenance: Provenance,
    metadata: Option<TrainingMetadata>,
}

impl LalStrategy {
    pub fn new(
        regressor: ForestModel,
        feature_schema: Vec<String>,
        provenance: Provenance,
        metadata: Option<TrainingMetadata>,
    ) -> Result<Self> {
        if regressor.mode() != Mode::Regression {
            return Err(Error::Model(
                "strategy regressor must be a regression forest".into(),
            ));
        }
        if feature_schema.len() != FEATURE_SCHEMA.len()
            || regressor.n_features() != feature_schema.len()
        {
            return Err(Error::SchemaMismatch {
                expected: FEATURE_SCHEMA.iter().map(|s| s.to_string()).collect(),
                found: feature_schema,
            });
        }
        Ok(LalStrategy {
            regressor,
            feature_schema,
            provenance,
            metadata,
        })
    }

    pub fn regressor(&self) -> &ForestModel {
        &self.regressor
    }

    pub fn feature_schema(&self) -> &[String] {
        &self.feature_schema
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn metadata(&self) -> Option<&TrainingMetadata> {
        self.metadata.as_ref()
    }

    fn check_schema(&self) -> Result<()> {
        if self
            .feature_schema
            .iter()
            .map(String::as_str)
            .ne(FEATURE_SCHEMA)
        {
            return Err(Error::SchemaMismatch {
                expected: FEATURE_SCHEMA.iter().map(|s| s.to_string()).collect(),
                found: self.feature_schema.clone(),
            });
        }
        Ok(())
    }

    /// Applies `f` to every regressor leaf.
    pub fn map_regressor_leaves(&mut self, f: impl Fn(f64) -> f64) {
        self.regressor.map_leaves(f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Random,
    Uncertainty,
    Lal(Box<LalStrategy>),
}

impl Strategy {
    pub fn id(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Uncertainty => "uncertainty",
            Strategy::Lal(l) => match l.provenance {
                Provenance::Independent => "lal-independent",
                Provenance::Iterative => "lal-iterative",
            },
        }
    }

    /// Picks one index from the unlabeled pool. `model` is the classifier
    /// trained on the current labeled set; `rng` is only drawn from by
    /// [`Strategy::Random`].
    pub fn select<R: Rng>(
        &self,
        model: &ForestModel,
        pool: &PoolState,
        dataset: &Dataset,
        rng: &mut R,
    ) -> Result<usize> {
        let pool_indices = pool.unlabeled();
        if pool_indices.is_empty() {
            return Err(Error::EmptyPool);
        }
        match self {
            Strategy::Random => Ok(pool_indices[rng.gen_range(0..pool_indices.len())]),
            Strategy::Uncertainty => select_uncertainty(model, pool, dataset),
            Strategy::Lal(lal) => select_lal(lal, model, pool, dataset),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Strategy::from_json(&text)
    }

    /// Single-line JSON record.
    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            Strategy::Random | Strategy::Uncertainty => StrategyFile {
                format: STRATEGY_FORMAT,
                kind: self.id().to_string(),
                feature_schema: None,
                provenance: None,
                training: None,
                regressor: None,
            },
            Strategy::Lal(l) => StrategyFile {
                format: STRATEGY_FORMAT,
                kind: "lal".into(),
                feature_schema: Some(l.feature_schema.clone()),
                provenance: Some(l.provenance),
                training: l.metadata.clone(),
                regressor: Some(l.regressor.clone()),
            },
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let file = StrategyFile::deserialize(&mut de)?;
        de.end()?;
        if file.format != STRATEGY_FORMAT {
            return Err(Error::FormatVersion {
                expected: STRATEGY_FORMAT,
                found: file.format,
            });
        }
        match file.kind.as_str() {
            "random" => Ok(Strategy::Random),
            "uncertainty" => Ok(Strategy::Uncertainty),
            "lal" => {
                let regressor = file
                    .regressor
                    .ok_or_else(|| Error::Model("LAL strategy file has no regressor".into()))?
                    .validated()?;
                let schema = file.feature_schema.ok_or_else(|| {
                    Error::Model("LAL strategy file has no feature schema".into())
                })?;
                let provenance = file
                    .provenance
                    .ok_or_else(|| Error::Model("LAL strategy file has no provenance".into()))?;
                let lal = LalStrategy::new(regressor, schema, provenance, file.training)?;
                lal.check_schema()?;
                Ok(Strategy::Lal(Box::new(lal)))
            }
            other => Err(Error::Model(format!("unknown strategy kind `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Serialize, Deserialize)]
struct StrategyFile {
    format: u32,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_schema: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    training: Option<TrainingMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regressor: Option<ForestModel>,
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Most uncertain pool member: maximal predictive entropy, smallest index
/// among ties.
pub fn select_uncertainty(
    model: &ForestModel,
    pool: &PoolState,
    dataset: &Dataset,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in pool.unlabeled() {
        let h = entropy(model.predict_proba(dataset.row(i)));
        if best.is_none_or(|(_, bh)| h > bh + ENTROPY_TIE_EPS) {
            best = Some((i, h));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyPool)
}

/// Work done by one learned selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SelectionCost {
    pub classifier_state_computations: usize,
    pub regressor_evaluations: usize,
}

pub fn select_lal(
    lal: &LalStrategy,
    model: &ForestModel,
    pool: &PoolState,
    dataset: &Dataset,
) -> Result<usize> {
    select_lal_with_cost(lal, model, pool, dataset).map(|(i, _)| i)
}

/// Argmax of predicted error reduction over the pool (smallest index among
/// ties). The classifier state is computed once and shared by all
/// candidates.
pub fn select_lal_with_cost(
    lal: &LalStrategy,
    model: &ForestModel,
    pool: &PoolState,
    dataset: &Dataset,
) -> Result<(usize, SelectionCost)> {
    lal.check_schema()?;
    let candidates = pool.unlabeled();
    if candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let phi = classifier_state(model, pool, dataset)?;
    let scores = par_map(candidates.len(), |k| {
        let psi = datapoint_features(model, dataset.row(candidates[k]));
        lal.regressor
            .predict_regression(assemble_state(&phi, psi).as_slice())
    });
    let cost = SelectionCost {
        classifier_state_computations: 1,
        regressor_evaluations: scores.len(),
    };
    let mut best = 0;
    for k in 1..scores.len() {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    Ok((candidates[best], cost))
}
