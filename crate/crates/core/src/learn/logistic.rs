use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_two_classes, sigmoid, softplus, Standardizer, Trained};
use crate::Result;

/// L2 penalty on the weights (not the bias): `L2_PENALTY / 2 * |w|^2`.
pub const L2_PENALTY: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let x = self.standardizer.apply(x);
        sigmoid(dot(&self.weights, &x) + self.bias)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean cross-entropy plus L2 penalty and its gradient, for parameters laid
/// out as `[w_0, ..., w_{d-1}, bias]` over already-standardized inputs.
pub fn logistic_objective(params: &[f64], xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (x, &y) in xs.iter().zip(ys) {
        let z = dot(w, x) + b;
        loss += softplus(z) - y * z;
        let dz = (sigmoid(z) - y) / n;
        for (g, v) in grad[..d].iter_mut().zip(x) {
            *g += dz * v;
        }
        grad[d] += dz;
    }
    loss /= n;
    for (g, wi) in grad[..d].iter_mut().zip(w) {
        loss += 0.5 * L2_PENALTY * wi * wi;
        *g += L2_PENALTY * wi;
    }
    (loss, grad)
}

/// Full-batch gradient descent from zero weights.
pub fn train_logistic(xs: &[Vec<f64>], labels: &[bool], epochs: usize, lr: f64) -> Result<Trained<LogisticModel>> {
    check_two_classes(labels, 2)?;
    let standardizer = Standardizer::fit(xs);
    let sx = standardizer.apply_all(xs);
    let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let d = sx[0].len();
    let mut params = vec![0.0; d + 1];
    let mut loss_history = Vec::with_capacity(epochs + 1);
    for _ in 0..epochs {
        let (loss, grad) = logistic_objective(&params, &sx, &ys);
        loss_history.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= lr * g;
        }
    }
    loss_history.push(logistic_objective(&params, &sx, &ys).0);
    let bias = params.pop().unwrap_or(0.0);
    Ok(Trained { model: LogisticModel { standardizer, weights: params, bias }, loss_history })
}
