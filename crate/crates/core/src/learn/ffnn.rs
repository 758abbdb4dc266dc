use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_two_classes, sigmoid, softplus, Standardizer, Trained};
use crate::{Error, Result};

/// One hidden tanh layer, sigmoid output.
///
/// Flat parameter layout: `w1` (hidden x inputs, row-major), `b1` (hidden),
/// `w2` (hidden), `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnModel {
    pub standardizer: Standardizer,
    pub inputs: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

fn param_count(inputs: usize, hidden: usize) -> usize {
    hidden * inputs + 2 * hidden + 1
}

/// Output logit and hidden activations.
fn forward(params: &[f64], inputs: usize, hidden: usize, x: &[f64], act: &mut [f64]) -> f64 {
    let (w1, rest) = params.split_at(hidden * inputs);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let mut z = b2[0];
    for h in 0..hidden {
        let row = &w1[h * inputs..(h + 1) * inputs];
        let pre: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[h];
        act[h] = libm::tanh(pre);
        z += w2[h] * act[h];
    }
    z
}

impl FfnnModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let x = self.standardizer.apply(x);
        let mut act = vec![0.0; self.hidden];
        sigmoid(forward(&self.params, self.inputs, self.hidden, &x, &mut act))
    }
}

/// Mean cross-entropy and its backpropagated gradient over standardized inputs.
pub fn ffnn_objective(params: &[f64], inputs: usize, hidden: usize, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut act = vec![0.0; hidden];
    let mut loss = 0.0;
    let w2_at = hidden * inputs + hidden;
    for (x, &y) in xs.iter().zip(ys) {
        let z = forward(params, inputs, hidden, x, &mut act);
        loss += softplus(z) - y * z;
        let dz = (sigmoid(z) - y) / n;
        grad[params.len() - 1] += dz;
        for h in 0..hidden {
            grad[w2_at + h] += dz * act[h];
            let dpre = dz * params[w2_at + h] * (1.0 - act[h] * act[h]);
            grad[hidden * inputs + h] += dpre;
            for (g, v) in grad[h * inputs..(h + 1) * inputs].iter_mut().zip(x) {
                *g += dpre * v;
            }
        }
    }
    (loss / n, grad)
}

/// Full-batch gradient descent from a seeded uniform(-0.5, 0.5) initialization.
pub fn train_ffnn(
    xs: &[Vec<f64>],
    labels: &[bool],
    hidden: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Trained<FfnnModel>> {
    check_two_classes(labels, 2)?;
    if hidden == 0 {
        return Err(Error::InvalidArgument("hidden layer needs at least one unit".into()));
    }
    let standardizer = Standardizer::fit(xs);
    let sx = standardizer.apply_all(xs);
    let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let inputs = sx[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: Vec<f64> = (0..param_count(inputs, hidden)).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut loss_history = Vec::with_capacity(epochs + 1);
    for _ in 0..epochs {
        let (loss, grad) = ffnn_objective(&params, inputs, hidden, &sx, &ys);
        loss_history.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= lr * g;
        }
    }
    loss_history.push(ffnn_objective(&params, inputs, hidden, &sx, &ys).0);
    Ok(Trained { model: FfnnModel { standardizer, inputs, hidden, params }, loss_history })
}
