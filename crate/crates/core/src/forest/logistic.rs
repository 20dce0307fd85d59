//! Full-batch gradient-descent logistic regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `dim` feature weights followed by the bias.
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim + 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub(crate) fn logit(&self, x: &[f64]) -> f64 {
        let (w, bias) = self.weights.split_at(self.weights.len() - 1);
        w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + bias[0]
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability of class 1.
pub fn predict_logistic(model: &LogisticModel, x: &[f64]) -> f64 {
    sigmoid(model.logit(x))
}

/// Mean negative log-likelihood.
pub fn log_loss(weights: &[f64], features: &[f64], targets: &[u8]) -> f64 {
    let model = LogisticModel {
        weights: weights.to_vec(),
    };
    let dim = model.dim();
    let total: f64 = features
        .chunks_exact(dim)
        .zip(targets)
        .map(|(x, &y)| {
            let z = model.logit(x);
            // log(1 + e^z) - y z, evaluated stably
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - y as f64 * z
        })
        .sum();
    total / targets.len() as f64
}

/// Gradient of [`log_loss`] with respect to the weights.
pub fn log_loss_gradient(weights: &[f64], features: &[f64], targets: &[u8]) -> Vec<f64> {
    let dim = weights.len() - 1;
    let model = LogisticModel {
        weights: weights.to_vec(),
    };
    let mut grad = vec![0.0; dim + 1];
    for (x, &y) in features.chunks_exact(dim).zip(targets) {
        let r = sigmoid(model.logit(x)) - y as f64;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += r * xi;
        }
        grad[dim] += r;
    }
    let n = targets.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

/// Gradient descent from zero weights for a fixed number of steps.
pub fn train_logistic(
    features: &[f64],
    dim: usize,
    targets: &[u8],
    learn_rate: f64,
    iterations: usize,
) -> Result<LogisticModel> {
    if targets.is_empty() || dim == 0 || features.len() != dim * targets.len() {
        return Err(Error::invalid("feature matrix does not match targets"));
    }
    if targets.iter().any(|&t| t > 1) {
        return Err(Error::invalid("logistic targets must be 0 or 1"));
    }
    if !(learn_rate > 0.0 && learn_rate.is_finite()) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let mut model = LogisticModel::zeros(dim);
    for _ in 0..iterations {
        let grad = log_loss_gradient(&model.weights, features, targets);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= learn_rate * g;
        }
    }
    Ok(model)
}
