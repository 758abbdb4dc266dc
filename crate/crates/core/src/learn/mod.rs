//! Similar/dissimilar classification of track pairs from metric features.
//!
//! Features are `(ed, dtw, pc)` per monitor item, in item order. Three
//! models are trained from scratch: logistic regression and a one-hidden-layer
//! tanh network (both full-batch gradient descent on cross-entropy), and a
//! k-nearest-neighbour vote. Inputs are standardized with training-set
//! statistics inside each trainer. The similar class is the positive class.
//!
//! Decision trees, naive Bayes, linear SVMs and random forests are not
//! provided.

mod auc;
mod features;
mod ffnn;
mod knn;
mod logistic;

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use auc::auc;
pub use features::{extract_features, features_from_breakdown, FeatureVector};
pub use ffnn::{ffnn_objective, train_ffnn, FfnnModel};
pub use knn::{knn_classify, KnnModel};
pub use logistic::{logistic_objective, train_logistic, LogisticModel, L2_PENALTY};

use crate::{Error, Result};

/// Per-feature mean and standard deviation from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(xs: &[Vec<f64>]) -> Self {
        let d = xs.first().map_or(0, Vec::len);
        let n = xs.len() as f64;
        let mut mean = vec![0.0; d];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 1e-24 { libm::sqrt(v) } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn apply_all(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.apply(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Ffnn,
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Hidden units of the feed-forward network.
    pub hidden: usize,
    /// Seed for network initialization.
    pub seed: u64,
    /// Neighbours for the KNN vote.
    pub k_nn: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 2000, lr: 0.5, hidden: 16, seed: 7, k_nn: 5 }
    }
}

/// A trained model together with its per-epoch training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained<M> {
    pub model: M,
    /// Loss before each epoch's update, followed by the final loss.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Logistic(LogisticModel),
    Ffnn(FfnnModel),
    Knn(KnnModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Logistic(_) => ModelKind::Logistic,
            Model::Ffnn(_) => ModelKind::Ffnn,
            Model::Knn(_) => ModelKind::Knn,
        }
    }

    /// Probability-like score of the similar class.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.predict(x),
            Model::Ffnn(m) => m.predict(x),
            Model::Knn(m) => m.score(x),
        }
    }
}

pub fn train(kind: ModelKind, xs: &[Vec<f64>], labels: &[bool], cfg: &TrainConfig) -> Result<Model> {
    Ok(match kind {
        ModelKind::Logistic => Model::Logistic(train_logistic(xs, labels, cfg.epochs, cfg.lr)?.model),
        ModelKind::Ffnn => Model::Ffnn(train_ffnn(xs, labels, cfg.hidden, cfg.epochs, cfg.lr, cfg.seed)?.model),
        ModelKind::Knn => Model::Knn(KnnModel::fit(xs, labels, cfg.k_nn.min(xs.len()))?),
    })
}

/// Cross-validated evaluation plus a model trained on all examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub kind: ModelKind,
    /// Mean of `fold_aucs`.
    pub auc: f64,
    pub fold_aucs: Vec<f64>,
    pub model: Model,
}

/// Fold index per example: each class is shuffled with `seed` and dealt
/// round-robin, so every fold's class counts are within one of the global
/// proportion.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

pub(crate) fn check_two_classes(labels: &[bool], min_each: usize) -> Result<()> {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    if pos < min_each || labels.len() - pos < min_each {
        return Err(Error::TooFewExamples(alloc::format!("need {min_each} examples of each class")));
    }
    Ok(())
}

/// Seeded stratified k-fold cross-validation.
pub fn cross_validate(
    xs: &[Vec<f64>],
    labels: &[bool],
    kind: ModelKind,
    folds: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<ModelReport> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if xs.len() != labels.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: labels.len() });
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    // Each held-out fold needs both classes, each training split at least 2 per class.
    check_two_classes(labels, folds.max(3)).map_err(|e| match e {
        Error::SingleClass => e,
        _ => Error::TooFewExamples(alloc::format!("{folds} folds need at least {} examples per class", folds.max(3))),
    })?;
    let assignment = stratified_folds(labels, folds, seed);
    let mut fold_aucs = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, &a) in assignment.iter().enumerate() {
            if a == f {
                vx.push(xs[i].clone());
                vy.push(labels[i]);
            } else {
                tx.push(xs[i].clone());
                ty.push(labels[i]);
            }
        }
        let model = train(kind, &tx, &ty, cfg)?;
        let scores: Vec<f64> = vx.iter().map(|x| model.score(x)).collect();
        fold_aucs.push(auc(&scores, &vy)?);
    }
    let mean_auc = fold_aucs.iter().sum::<f64>() / folds as f64;
    let model = train(kind, xs, labels, cfg)?;
    Ok(ModelReport { kind, auc: mean_auc, fold_aucs, model })
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}
