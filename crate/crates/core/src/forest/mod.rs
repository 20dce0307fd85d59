//! Bagged CART forests used both as the probabilistic classifier and as
//! the error-reduction regressor, plus a logistic-regression classifier.
//!
//! A classification forest predicts the probability of class **0**: each
//! leaf stores the class-0 frequency of its bootstrap samples and the
//! forest averages leaf values over trees.

mod logistic;
mod split;
mod tree;

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

pub use logistic::{log_loss, log_loss_gradient, predict_logistic, train_logistic, LogisticModel};
pub use split::{best_split, gini, impurity, Criterion, Split};
pub use tree::TreeNode;

use crate::error::{Error, Result};
use crate::seed::{par_map, rng_from};
use tree::{grow, TrainView, TreeParams};

pub const FOREST_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf_size: usize,
    /// `None` means `ceil(sqrt(dim))`.
    pub features_per_split: Option<usize>,
    pub mode: Mode,
    /// Out-of-bag accuracy reported when no sample is out of bag anywhere.
    pub oob_fallback: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig::classifier()
    }
}

/// Reads a possibly partial config object on top of `base`, so omitted
/// fields keep the role's defaults rather than the classifier's.
fn overlay<'de, D: Deserializer<'de>>(
    base: ForestConfig,
    deserializer: D,
) -> Result<ForestConfig, D::Error> {
    let patch = serde_json::Value::deserialize(deserializer)?;
    let serde_json::Value::Object(patch) = patch else {
        return Err(D::Error::custom("forest config must be a JSON object"));
    };
    let mut value = serde_json::to_value(base).map_err(D::Error::custom)?;
    if let Some(fields) = value.as_object_mut() {
        fields.extend(patch);
    }
    serde_json::from_value(value).map_err(D::Error::custom)
}

/// `deserialize_with` helper: partial object over [`ForestConfig::classifier`].
pub fn classifier_config<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> Result<ForestConfig, D::Error> {
    overlay(ForestConfig::classifier(), deserializer)
}

/// `deserialize_with` helper: partial object over [`ForestConfig::regressor`].
pub fn regressor_config<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> Result<ForestConfig, D::Error> {
    overlay(ForestConfig::regressor(), deserializer)
}

impl ForestConfig {
    pub fn classifier() -> Self {
        ForestConfig {
            n_trees: 50,
            max_depth: None,
            min_leaf_size: 1,
            features_per_split: None,
            mode: Mode::Classification,
            oob_fallback: 1.0,
        }
    }

    pub fn regressor() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf_size: 5,
            features_per_split: None,
            mode: Mode::Regression,
            oob_fallback: 1.0,
        }
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::invalid("features_per_split must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.oob_fallback) {
            return Err(Error::invalid("oob_fallback must lie in [0, 1]"));
        }
        Ok(())
    }

    fn features_per_split_for(&self, dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    format: u32,
    mode: Mode,
    config: ForestConfig,
    n_features: usize,
    seed: u64,
    trees: Vec<TreeNode>,
    /// Per-tree bootstrap multiplicity of every training row. Not
    /// serialized; a loaded model cannot report out-of-bag accuracy.
    #[serde(skip)]
    in_bag: Vec<Vec<u32>>,
}

/// Trains a forest on row-major `features` (`targets.len()` rows of
/// `dim` values). Tree `k` draws its bootstrap and feature subsets from a
/// stream derived from `(seed, k)`.
pub fn train_forest(
    features: &[f64],
    dim: usize,
    targets: &[f64],
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    config.validate()?;
    let n = targets.len();
    if n == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if dim == 0 || features.len() != n * dim {
        return Err(Error::invalid("feature matrix does not match targets"));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("non-finite training target"));
    }
    let criterion = match config.mode {
        Mode::Classification => {
            if targets.iter().any(|&t| t != 0.0 && t != 1.0) {
                return Err(Error::invalid("classification targets must be 0 or 1"));
            }
            Criterion::Gini
        }
        Mode::Regression => Criterion::Variance,
    };
    let params = TreeParams {
        criterion,
        max_depth: config.max_depth,
        min_leaf: config.min_leaf_size.max(1),
        features_per_split: config.features_per_split_for(dim),
    };
    let view = TrainView {
        features,
        dim,
        targets,
    };

    let grown = par_map(config.n_trees, |k| {
        let mut rng = rng_from(seed, &[k as u64]);
        let mut rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut counts = vec![0u32; n];
        for &r in &rows {
            counts[r] += 1;
        }
        let tree = grow(&view, &mut rows, 0, &params, &mut rng);
        (tree, counts)
    });
    let (trees, in_bag) = grown.into_iter().unzip();

    Ok(ForestModel {
        format: FOREST_FORMAT,
        mode: config.mode,
        config: config.clone(),
        n_features: dim,
        seed,
        trees,
        in_bag,
    })
}

impl ForestModel {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn mean_leaf_value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_features);
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(x)).sum();
        sum / self.trees.len() as f64
    }

    /// Probability of class 0 at `x`: the mean of the trees' leaf class-0
    /// frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(self.mode, Mode::Classification);
        self.mean_leaf_value(x)
    }

    pub fn predict_regression(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(self.mode, Mode::Regression);
        self.mean_leaf_value(x)
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.leaf_value(x)).collect()
    }

    /// Population variance of the per-tree predictions at `x`.
    pub fn tree_variance(&self, x: &[f64]) -> f64 {
        let preds = self.tree_predictions(x);
        let mean = preds.iter().sum::<f64>() / preds.len() as f64;
        preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / preds.len() as f64
    }

    /// Out-of-bag accuracy on the training set the model was fitted to.
    /// Each row is predicted by a hard majority vote of the trees whose
    /// bootstrap excludes it (ties go to the mean leaf value); rows that
    /// are in every bootstrap are skipped.
    pub fn oob_accuracy(&self, features: &[f64], targets: &[f64]) -> Result<f64> {
        if self.mode != Mode::Classification {
            return Err(Error::Model(
                "out-of-bag accuracy needs a classification forest".into(),
            ));
        }
        if self.in_bag.len() != self.trees.len() {
            return Err(Error::Model("model carries no bootstrap record".into()));
        }
        let n = targets.len();
        if self.in_bag.iter().any(|c| c.len() != n) || features.len() != n * self.n_features {
            return Err(Error::Model(
                "training set does not match the bootstrap record".into(),
            ));
        }

        let mut evaluated = 0usize;
        let mut correct = 0usize;
        for i in 0..n {
            let x = &features[i * self.n_features..(i + 1) * self.n_features];
            let (mut votes0, mut votes1, mut soft, mut count) = (0usize, 0usize, 0.0, 0usize);
            for (tree, bag) in self.trees.iter().zip(&self.in_bag) {
                if bag[i] > 0 {
                    continue;
                }
                let p0 = tree.leaf_value(x);
                soft += p0;
                count += 1;
                if p0 > 0.5 {
                    votes0 += 1;
                } else if p0 < 0.5 {
                    votes1 += 1;
                }
            }
            if count == 0 {
                continue;
            }
            let predicted = match votes0.cmp(&votes1) {
                std::cmp::Ordering::Greater => 0.0,
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => {
                    if soft / count as f64 >= 0.5 {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
            evaluated += 1;
            if predicted == targets[i] {
                correct += 1;
            }
        }
        Ok(if evaluated == 0 {
            self.config.oob_fallback
        } else {
            correct as f64 / evaluated as f64
        })
    }

    /// Mean decrease in impurity per feature, summed over every split of
    /// every tree (weighted by node sample count) and normalized to sum to
    /// one. All zeros when no split has a positive decrease.
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for t in &self.trees {
            t.accumulate_importances(&mut out);
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            out.iter_mut().for_each(|v| *v /= total);
        }
        out
    }

    pub fn avg_tree_depth(&self) -> f64 {
        self.trees.iter().map(|t| t.depth() as f64).sum::<f64>() / self.trees.len() as f64
    }

    /// Applies `f` to every leaf value. Used to build transformed copies of
    /// a regressor.
    pub fn map_leaves(&mut self, f: impl Fn(f64) -> f64) {
        for t in &mut self.trees {
            t.map_leaves(&f);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let model = ForestModel::deserialize(&mut de)?;
        de.end()?;
        model.validated()
    }

    pub(crate) fn validated(self) -> Result<Self> {
        if self.format != FOREST_FORMAT {
            return Err(Error::FormatVersion {
                expected: FOREST_FORMAT,
                found: self.format,
            });
        }
        if self.trees.is_empty() {
            return Err(Error::Model("forest has no trees".into()));
        }
        if self.mode != self.config.mode {
            return Err(Error::Model("forest mode disagrees with its config".into()));
        }
        fn check(node: &TreeNode, dim: usize) -> bool {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    *feature < dim && threshold.is_finite() && check(left, dim) && check(right, dim)
                }
                TreeNode::Leaf { value, .. } => value.is_finite(),
            }
        }
        if !self.trees.iter().all(|t| check(t, self.n_features)) {
            return Err(Error::Model(
                "tree references an invalid feature or value".into(),
            ));
        }
        Ok(self)
    }

    #[cfg(test)]
    pub(crate) fn from_trees(mode: Mode, n_features: usize, trees: Vec<TreeNode>) -> Self {
        let config = ForestConfig {
            mode,
            n_trees: trees.len(),
            ..ForestConfig::classifier()
        };
        ForestModel {
            format: FOREST_FORMAT,
            mode,
            config,
            n_features,
            seed: 0,
            trees,
            in_bag: Vec::new(),
        }
    }
}
