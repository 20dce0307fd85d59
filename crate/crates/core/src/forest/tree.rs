//! CART tree nodes and greedy induction on a bootstrap sample.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split_sorted, impurity, Criterion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Routes `x` left iff `x[feature] <= threshold`.
    Internal {
        feature: usize,
        threshold: f64,
        samples: usize,
        /// Impurity decrease times the node's sample count.
        weighted_decrease: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    /// Class-0 frequency for classification trees, target mean for
    /// regression trees.
    Leaf { value: f64, samples: usize },
}

impl TreeNode {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    }
                }
                TreeNode::Leaf { value, .. } => return *value,
            }
        }
    }

    /// Length of the longest root-to-leaf path (0 for a bare leaf).
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub(crate) fn accumulate_importances(&self, out: &mut [f64]) {
        if let TreeNode::Internal {
            feature,
            weighted_decrease,
            left,
            right,
            ..
        } = self
        {
            out[*feature] += weighted_decrease;
            left.accumulate_importances(out);
            right.accumulate_importances(out);
        }
    }

    pub(crate) fn map_leaves(&mut self, f: &impl Fn(f64) -> f64) {
        match self {
            TreeNode::Internal { left, right, .. } => {
                left.map_leaves(f);
                right.map_leaves(f);
            }
            TreeNode::Leaf { value, .. } => *value = f(*value),
        }
    }
}

pub(crate) struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
}

/// Borrowed row-major training data.
pub(crate) struct TrainView<'a> {
    pub features: &'a [f64],
    pub dim: usize,
    pub targets: &'a [f64],
}

impl TrainView<'_> {
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.dim + feature]
    }
}

pub(crate) fn grow<R: Rng>(
    view: &TrainView<'_>,
    rows: &mut [usize],
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode {
    let targets: Vec<f64> = rows.iter().map(|&r| view.targets[r]).collect();
    let node_impurity = impurity(&targets, params.criterion);
    let leaf = || {
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let value = match params.criterion {
            Criterion::Gini => 1.0 - mean,
            Criterion::Variance => mean,
        };
        TreeNode::Leaf {
            value,
            samples: rows.len(),
        }
    };

    if node_impurity <= 0.0
        || rows.len() < 2 * params.min_leaf.max(1)
        || params.max_depth.is_some_and(|d| depth >= d)
    {
        return leaf();
    }

    // Examine a random subset of features; keep drawing past the subset
    // only while no valid split has been found.
    let mut order: Vec<usize> = (0..view.dim).collect();
    order.shuffle(rng);
    let mut best: Option<(usize, f64, f64)> = None;
    let mut pairs = Vec::with_capacity(rows.len());
    for (k, &feature) in order.iter().enumerate() {
        if k >= params.features_per_split && best.is_some() {
            break;
        }
        pairs.clear();
        pairs.extend(
            rows.iter()
                .map(|&r| (view.value(r, feature), view.targets[r])),
        );
        let Some(s) = best_split_sorted(&mut pairs, params.criterion, params.min_leaf) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((bf, bt, bd)) => {
                s.impurity_decrease > bd
                    || (s.impurity_decrease == bd
                        && (s.threshold < bt || (s.threshold == bt && feature < bf)))
            }
        };
        if better {
            best = Some((feature, s.threshold, s.impurity_decrease));
        }
    }

    let Some((feature, threshold, decrease)) = best else {
        return leaf();
    };

    let n = rows.len();
    let mut split_at = 0;
    for i in 0..n {
        if view.value(rows[i], feature) <= threshold {
            rows.swap(i, split_at);
            split_at += 1;
        }
    }
    let (left_rows, right_rows) = rows.split_at_mut(split_at);
    let left = grow(view, left_rows, depth + 1, params, rng);
    let right = grow(view, right_rows, depth + 1, params, rng);
    TreeNode::Internal {
        feature,
        threshold,
        samples: n,
        weighted_decrease: decrease.max(0.0) * n as f64,
        left: Box::new(left),
        right: Box::new(right),
    }
}
