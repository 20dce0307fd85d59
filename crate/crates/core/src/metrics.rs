//! Binary classification metrics. Class 1 is the positive class throughout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn from_predictions(predicted: &[u8], truth: &[u8]) -> Self {
        assert_eq!(
            predicted.len(),
            truth.len(),
            "prediction/label length mismatch"
        );
        let mut c = ConfusionCounts::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fp += 1,
                (_, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    let total = c.total();
    if total == 0 {
        return 1.0;
    }
    (c.tp + c.tn) as f64 / total as f64
}

pub fn zero_one_loss(c: &ConfusionCounts) -> f64 {
    1.0 - accuracy(c)
}

/// Intersection over union of the positive class; 1.0 when nothing is
/// predicted or present.
pub fn iou(c: &ConfusionCounts) -> f64 {
    let denom = c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        c.tp as f64 / denom as f64
    }
}

pub fn dice(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

/// Area under the ROC curve via the Mann-Whitney U statistic with
/// mid-ranks, so tied scores contribute one half. `scores` are
/// higher-means-positive.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric {
            metric: "auc".into(),
            reason: "labels contain a single class".into(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their average
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += mid_rank * pos_in_group as f64;
        i = j;
    }

    let n_pos = n_pos as f64;
    let u = rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

/// Metric identifiers accepted by configs and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    ZeroOne,
    Iou,
    Dice,
    Auc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::ZeroOne,
        Metric::Iou,
        Metric::Dice,
        Metric::Auc,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::ZeroOne => "zero_one",
            Metric::Iou => "iou",
            Metric::Dice => "dice",
            Metric::Auc => "auc",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::ZeroOne)
    }

    /// Evaluates the metric from class-0 probabilities. Hard predictions
    /// are class 0 iff `p0 >= 0.5`; AUC scores with `1 - p0`.
    pub fn evaluate(self, prob_class0: &[f64], truth: &[u8]) -> Result<f64> {
        if self == Metric::Auc {
            let scores: Vec<f64> = prob_class0.iter().map(|p| 1.0 - p).collect();
            return auc_roc(&scores, truth);
        }
        let predicted: Vec<u8> = prob_class0.iter().map(|&p| hard_label(p)).collect();
        let c = ConfusionCounts::from_predictions(&predicted, truth);
        Ok(match self {
            Metric::Accuracy => accuracy(&c),
            Metric::ZeroOne => zero_one_loss(&c),
            Metric::Iou => iou(&c),
            Metric::Dice => dice(&c),
            Metric::Auc => unreachable!(),
        })
    }

    /// The value as a loss (lower is better).
    pub fn as_loss(self, value: f64) -> f64 {
        if self.higher_is_better() {
            1.0 - value
        } else {
            value
        }
    }
}

pub fn hard_label(prob_class0: f64) -> u8 {
    if prob_class0 >= 0.5 {
        0
    } else {
        1
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric `{s}`")))
    }
}
