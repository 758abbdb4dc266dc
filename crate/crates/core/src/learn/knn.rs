use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::{Error, Result};

/// Stored training set for k-nearest-neighbour voting in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub standardizer: Standardizer,
    pub xs: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub k_nn: usize,
}

impl KnnModel {
    pub fn fit(xs: &[Vec<f64>], labels: &[bool], k_nn: usize) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        if xs.len() != labels.len() {
            return Err(Error::LengthMismatch { left: xs.len(), right: labels.len() });
        }
        if k_nn == 0 || k_nn > xs.len() {
            return Err(Error::InvalidArgument(alloc::format!("k_nn = {k_nn} outside 1..={}", xs.len())));
        }
        let standardizer = Standardizer::fit(xs);
        let xs = standardizer.apply_all(xs);
        Ok(Self { standardizer, xs, labels: labels.to_vec(), k_nn })
    }

    /// Fraction of similar labels among the `k_nn` nearest training points.
    /// Distance ties go to the lower training index; a query equal to a
    /// training point counts that point as a neighbour.
    pub fn score(&self, query: &[f64]) -> f64 {
        let q = self.standardizer.apply(query);
        let mut dist: Vec<(f64, usize)> = self
            .xs
            .iter()
            .enumerate()
            .map(|(i, x)| (x.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let hits = dist[..self.k_nn].iter().filter(|(_, i)| self.labels[*i]).count();
        hits as f64 / self.k_nn as f64
    }
}

pub fn knn_classify(xs: &[Vec<f64>], labels: &[bool], query: &[f64], k_nn: usize) -> Result<f64> {
    Ok(KnnModel::fit(xs, labels, k_nn)?.score(query))
}
