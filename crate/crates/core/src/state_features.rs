//! The learning-state vector: six classifier-state features followed by
//! one candidate-datapoint feature.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PoolState};
use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestConfig, ForestModel, Mode};

pub const STATE_DIM: usize = 7;

/// Names of the learning-state coordinates, in vector order.
pub const FEATURE_SCHEMA: [&str; STATE_DIM] = [
    "proportion_class0",
    "oob_accuracy",
    "importance_variance",
    "forest_variance",
    "avg_tree_depth",
    "labeled_size",
    "predicted_probability_class0",
];

pub fn feature_schema() -> Vec<String> {
    FEATURE_SCHEMA.iter().map(|s| s.to_string()).collect()
}

/// Features of the classifier trained on the current labeled set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierState(pub [f64; 6]);

/// Classifier state concatenated with the candidate's predicted class-0
/// probability, which is always the last coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningState(pub [f64; STATE_DIM]);

impl LearningState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn psi(&self) -> f64 {
        self.0[STATE_DIM - 1]
    }
}

/// Trains a classification forest on the rows `indices` of `dataset`, in
/// that order.
pub fn train_classifier(
    dataset: &Dataset,
    indices: &[usize],
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    let (x, y) = gather(dataset, indices);
    let config = ForestConfig {
        mode: Mode::Classification,
        ..config.clone()
    };
    train_forest(&x, dataset.dim(), &y, &config, seed)
}

fn gather(dataset: &Dataset, indices: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(indices.len() * dataset.dim());
    for &i in indices {
        x.extend_from_slice(dataset.row(i));
    }
    let y = indices.iter().map(|&i| dataset.label(i) as f64).collect();
    (x, y)
}

fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Classifier-state features for `model`, which must have been trained
/// (e.g. by [`train_classifier`]) on `pool.labeled()` in order:
/// class-0 proportion of the labeled set, out-of-bag accuracy, variance of
/// the feature importances, mean per-point across-tree prediction variance
/// over the pool, average tree depth, and labeled-set size.
pub fn classifier_state(
    model: &ForestModel,
    pool: &PoolState,
    dataset: &Dataset,
) -> Result<ClassifierState> {
    if pool.unlabeled().is_empty() {
        return Err(Error::EmptyPool);
    }
    let (x, y) = gather(dataset, pool.labeled());
    let oob = model.oob_accuracy(&x, &y)?;
    let importance_variance = population_variance(&model.feature_importances());
    let forest_variance = pool
        .unlabeled()
        .iter()
        .map(|&i| model.tree_variance(dataset.row(i)))
        .sum::<f64>()
        / pool.unlabeled().len() as f64;
    Ok(ClassifierState([
        pool.class0_proportion(dataset),
        oob,
        importance_variance,
        forest_variance,
        model.avg_tree_depth(),
        pool.labeled().len() as f64,
    ]))
}

/// The candidate feature: predicted probability of class 0 at `x`.
pub fn datapoint_features(model: &ForestModel, x: &[f64]) -> f64 {
    model.predict_proba(x)
}

pub fn assemble_state(phi: &ClassifierState, psi: f64) -> LearningState {
    let mut xi = [0.0; STATE_DIM];
    xi[..6].copy_from_slice(&phi.0);
    xi[6] = psi;
    LearningState(xi)
}
