//! Impurity measures and the single-feature threshold search.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Gini impurity of 0/1 targets.
    Gini,
    /// Population variance of real targets.
    Variance,
}

/// Gini impurity of a node holding `ones` class-1 samples out of `n`.
pub fn gini(n: usize, ones: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = ones as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn variance(n: usize, sum: f64, sum_sq: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    (sum_sq / n as f64 - mean * mean).max(0.0)
}

/// Impurity of a target multiset under `criterion`.
pub fn impurity(targets: &[f64], criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Gini => gini(targets.len(), targets.iter().filter(|&&t| t > 0.5).count()),
        Criterion::Variance => {
            let (s, s2) = targets
                .iter()
                .fold((0.0, 0.0), |(s, s2), &t| (s + t, s2 + t * t));
            variance(targets.len(), s, s2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub threshold: f64,
    /// Parent impurity minus the size-weighted child impurities.
    pub impurity_decrease: f64,
}

/// Running sufficient statistics of one side of a candidate split.
#[derive(Clone, Copy, Default)]
struct SideStats {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl SideStats {
    fn push(&mut self, t: f64) {
        self.n += 1;
        self.sum += t;
        self.sum_sq += t * t;
    }

    fn impurity(&self, criterion: Criterion) -> f64 {
        match criterion {
            // 0/1 targets: the sum is the count of ones
            Criterion::Gini => gini(self.n, self.sum.round() as usize),
            Criterion::Variance => variance(self.n, self.sum, self.sum_sq),
        }
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    // adjacent floats: the midpoint rounds onto `hi`
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Best threshold for one feature, or `None` when no threshold between
/// distinct values leaves at least one sample on each side.
pub fn best_split(feature: &[f64], targets: &[f64], criterion: Criterion) -> Option<Split> {
    let mut pairs: Vec<(f64, f64)> = feature
        .iter()
        .copied()
        .zip(targets.iter().copied())
        .collect();
    best_split_sorted(&mut pairs, criterion, 1)
}

/// Threshold search over `(value, target)` pairs, which are sorted in place.
/// Only thresholds leaving `min_leaf` samples on both sides are considered.
/// Ties keep the smallest threshold.
pub(crate) fn best_split_sorted(
    pairs: &mut [(f64, f64)],
    criterion: Criterion,
    min_leaf: usize,
) -> Option<Split> {
    let n = pairs.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = SideStats::default();
    for &(_, t) in pairs.iter() {
        total.push(t);
    }
    let parent = total.impurity(criterion);

    let mut left = SideStats::default();
    let mut best: Option<Split> = None;
    for i in 0..n - 1 {
        left.push(pairs[i].1);
        let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
        if lo == hi || left.n < min_leaf || n - left.n < min_leaf {
            continue;
        }
        let right = SideStats {
            n: total.n - left.n,
            sum: total.sum - left.sum,
            sum_sq: total.sum_sq - left.sum_sq,
        };
        let weighted = (left.n as f64 * left.impurity(criterion)
            + right.n as f64 * right.impurity(criterion))
            / n as f64;
        let decrease = parent - weighted;
        if best.is_none_or(|b| decrease > b.impurity_decrease) {
            best = Some(Split {
                threshold: midpoint(lo, hi),
                impurity_decrease: decrease,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_balanced_split() {
        let s = best_split(
            &[1.0, 2.0, 3.0, 4.0],
            &[0.0, 0.0, 1.0, 1.0],
            Criterion::Gini,
        )
        .unwrap();
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.impurity_decrease, 0.5);
    }

    #[test]
    fn constant_feature_has_no_split() {
        assert!(best_split(&[3.0; 5], &[0.0, 1.0, 0.0, 1.0, 1.0], Criterion::Gini).is_none());
        assert!(best_split(&[1.0], &[0.0], Criterion::Variance).is_none());
    }

    #[test]
    fn ties_take_smallest_threshold() {
        // splitting at 1.5 or 3.5 isolates one sample of each class equally
        let s = best_split(
            &[1.0, 2.0, 3.0, 4.0],
            &[1.0, 0.0, 0.0, 1.0],
            Criterion::Gini,
        )
        .unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(6, 3), 0.5);
        assert_eq!(gini(4, 0), 0.0);
        assert_eq!(gini(4, 4), 0.0);
        assert_eq!(impurity(&[0.0, 1.0, 1.0, 0.0], Criterion::Gini), 0.5);
    }

    #[test]
    fn min_leaf_restricts_candidates() {
        let f = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = [0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(best_split(&f, &t, Criterion::Gini).unwrap().threshold, 1.5);
        let mut pairs: Vec<_> = f.iter().copied().zip(t).collect();
        assert_eq!(
            best_split_sorted(&mut pairs, Criterion::Gini, 2)
                .unwrap()
                .threshold,
            2.5
        );
        assert!(best_split_sorted(&mut pairs, Criterion::Gini, 4).is_none());
    }

    proptest! {
        #[test]
        fn gini_of_balanced_multiset_is_half(k in 1usize..500) {
            prop_assert_eq!(gini(2 * k, k), 0.5);
        }

        #[test]
        fn variance_decrease_is_non_negative(
            data in proptest::collection::vec((0u8..8, -5.0f64..5.0), 2..40)
        ) {
            let f: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let t: Vec<f64> = data.iter().map(|d| d.1).collect();
            if let Some(s) = best_split(&f, &t, Criterion::Variance) {
                prop_assert!(s.impurity_decrease >= -1e-12);
            }
        }
    }
}
