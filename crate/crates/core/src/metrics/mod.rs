//! Similarity measures between tracks.
//!
//! Per channel, both series are z-scored. Euclidean distance and Pearson
//! correlation are computed on the z-scored series resampled to a common
//! grid; DTW runs on the z-scored series at their native lengths. The
//! ensemble similarity score is `SS = PC - (ED + DTW) / k`. Aggregates are
//! weighted means over the channels both tracks carry.

mod dtw;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use dtw::{band_half_width, dtw, dtw_path, WarpPath};

use crate::model::{
    resample_to_grid, zscore, ChannelSeries, Label, LabeledPair, MonitorItemSet, Track, TrackSource,
};
use crate::stats::welch_from_moments;
use crate::{Error, Result};

pub const K_MIN: f64 = 2.0;
pub const K_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Distance calibration factor, `2 <= k <= 10`.
    pub k: f64,
    /// Resample size for ED and PC.
    pub grid_n: usize,
    /// Sakoe-Chiba band half-width as a fraction of the longer series.
    pub dtw_band_frac: f64,
    /// Per-channel weights; channels not listed weigh 1.
    pub channel_weights: BTreeMap<String, f64>,
    /// Compare tracks whose keys differ.
    pub allow_cross_type: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            k: 4.0,
            grid_n: 512,
            dtw_band_frac: 0.1,
            channel_weights: BTreeMap::new(),
            allow_cross_type: false,
        }
    }
}

impl MetricConfig {
    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_k(self.k)?;
        if self.grid_n < 2 {
            return Err(Error::GridTooSmall(self.grid_n));
        }
        if !(self.dtw_band_frac > 0.0 && self.dtw_band_frac <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "dtw_band_frac {} outside (0, 1]",
                self.dtw_band_frac
            )));
        }
        if self.channel_weights.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig("channel weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn weight(&self, channel: &str) -> f64 {
        self.channel_weights.get(channel).copied().unwrap_or(1.0)
    }
}

fn check_k(k: f64) -> Result<()> {
    if (K_MIN..=K_MAX).contains(&k) {
        Ok(())
    } else {
        Err(Error::KOutOfRange(k))
    }
}

/// Metrics for one channel of a track pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub ed: f64,
    pub dtw: f64,
    pub pc: f64,
    pub ss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    pub per_channel: BTreeMap<String, ChannelMetrics>,
    pub aggregate_ss: f64,
    pub aggregate_pc: f64,
    pub aggregate_ed: f64,
    pub aggregate_dtw: f64,
    /// Requested channels absent from either track.
    #[serde(default)]
    pub missing_channels: Vec<String>,
}

impl SimilarityBreakdown {
    /// Aggregate similarity score re-evaluated for another `k`.
    ///
    /// Exact because SS is affine in the per-channel quantities and the
    /// aggregate is a weighted mean.
    pub fn aggregate_ss_at(&self, k: f64) -> f64 {
        self.aggregate_pc - (self.aggregate_ed + self.aggregate_dtw) / k
    }
}

/// Root-mean-square difference `sqrt(mean((x - y)^2))`.
pub fn euclidean_rms(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::SeriesTooShort(x.len()));
    }
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(ss / x.len() as f64))
}

/// Pearson product-moment correlation.
///
/// `x_const` / `y_const` carry the pre-normalization mean of a series that
/// was flagged constant by [`zscore`]. One constant side gives 0; two
/// constant sides give 1 when their means agree within 1e-9, else 0. An
/// unflagged zero-variance input also gives 0.
pub fn pearson(x: &[f64], y: &[f64], x_const: Option<f64>, y_const: Option<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::SeriesTooShort(x.len()));
    }
    match (x_const, y_const) {
        (Some(a), Some(b)) => return Ok(if (a - b).abs() < 1e-9 { 1.0 } else { 0.0 }),
        (Some(_), None) | (None, Some(_)) => return Ok(0.0),
        (None, None) => {}
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// `SS = PC - (ED + DTW) / k`, unclamped.
pub fn similarity_score(pc: f64, ed: f64, dtw: f64, k: f64) -> Result<f64> {
    check_k(k)?;
    Ok(pc - (ed + dtw) / k)
}

/// ED, DTW, PC and SS for one pair of channels.
pub fn compare_channels(a: &ChannelSeries, b: &ChannelSeries, cfg: &MetricConfig) -> Result<ChannelMetrics> {
    channel_metrics(a, b, cfg, true)
}

/// With `with_dtw == false` the DTW term is taken as 0, which bounds SS from above.
fn channel_metrics(a: &ChannelSeries, b: &ChannelSeries, cfg: &MetricConfig, with_dtw: bool) -> Result<ChannelMetrics> {
    let za = zscore(&a.values);
    let zb = zscore(&b.values);
    let grid_a = resample_to_grid(&ChannelSeries { values: za.values.clone(), ..a.clone() }, cfg.grid_n)?;
    let grid_b = resample_to_grid(&ChannelSeries { values: zb.values.clone(), ..b.clone() }, cfg.grid_n)?;
    let ed = euclidean_rms(&grid_a, &grid_b)?;
    let pc = pearson(&grid_a, &grid_b, za.constant_mean(), zb.constant_mean())?;
    let dtw = if with_dtw { dtw(&za.values, &zb.values, cfg.dtw_band_frac)? } else { 0.0 };
    let ss = similarity_score(pc, ed, dtw, cfg.k)?;
    Ok(ChannelMetrics { ed, dtw, pc, ss })
}

/// Per-channel and aggregate similarity of two tracks over `items`.
pub fn compare_tracks(a: &Track, b: &Track, items: &MonitorItemSet, cfg: &MetricConfig) -> Result<SimilarityBreakdown> {
    aggregate(a, b, items, cfg, true)
}

/// Upper bound on `compare_tracks(..).aggregate_ss` that skips DTW.
///
/// Uses the same arithmetic with DTW replaced by 0; IEEE rounding is
/// monotone, so the bound holds exactly, not just up to rounding.
pub fn ss_upper_bound(a: &Track, b: &Track, items: &MonitorItemSet, cfg: &MetricConfig) -> Result<f64> {
    Ok(aggregate(a, b, items, cfg, false)?.aggregate_ss)
}

fn aggregate(a: &Track, b: &Track, items: &MonitorItemSet, cfg: &MetricConfig, with_dtw: bool) -> Result<SimilarityBreakdown> {
    cfg.validate()?;
    if a.key != b.key && !cfg.allow_cross_type {
        return Err(Error::TypeMismatch);
    }
    let mut per_channel = BTreeMap::new();
    let mut missing = Vec::new();
    let mut weighted = [0.0f64; 4];
    let mut weight_sum = 0.0;
    for name in items.iter() {
        let (Some(ca), Some(cb)) = (a.channel(name), b.channel(name)) else {
            missing.push(String::from(name));
            continue;
        };
        let m = channel_metrics(ca, cb, cfg, with_dtw)?;
        let w = cfg.weight(name);
        weighted[0] += w * m.ss;
        weighted[1] += w * m.pc;
        weighted[2] += w * m.ed;
        weighted[3] += w * m.dtw;
        weight_sum += w;
        per_channel.insert(String::from(name), m);
    }
    if per_channel.is_empty() {
        return Err(Error::NoSharedChannels);
    }
    if weight_sum <= 0.0 {
        return Err(Error::InvalidConfig("channel weights of shared channels sum to zero".into()));
    }
    Ok(SimilarityBreakdown {
        per_channel,
        aggregate_ss: weighted[0] / weight_sum,
        aggregate_pc: weighted[1] / weight_sum,
        aggregate_ed: weighted[2] / weight_sum,
        aggregate_dtw: weighted[3] / weight_sum,
        missing_channels: missing,
    })
}

/// The calibration grid `{2.0, 2.5, ..., 10.0}`.
pub fn k_grid() -> impl Iterator<Item = f64> {
    (0..=16).map(|i| K_MIN + 0.5 * i as f64)
}

/// Welch t-statistic of aggregate SS (similar minus dissimilar) at a given `k`.
pub fn separation_t(scored: &[(SimilarityBreakdown, Label)], k: f64) -> f64 {
    let (mut sim, mut dis) = (Vec::new(), Vec::new());
    for (b, label) in scored {
        let ss = b.aggregate_ss_at(k);
        if label.is_similar() {
            sim.push(ss);
        } else {
            dis.push(ss);
        }
    }
    let stat = |v: &[f64]| {
        let m = crate::model::mean(v);
        (m, crate::model::sample_std(v, m), v.len() as f64)
    };
    let (ma, sa, na) = stat(&sim);
    let (mb, sb, nb) = stat(&dis);
    welch_from_moments(ma, sa, na, mb, sb, nb).t_stat
}

/// Grid search for the `k` that best separates labeled pairs by aggregate SS.
pub fn calibrate_k_from_breakdowns(scored: &[(SimilarityBreakdown, Label)]) -> Result<f64> {
    let similar = scored.iter().filter(|(_, l)| l.is_similar()).count();
    if similar < 2 || scored.len() - similar < 2 {
        return Err(Error::InsufficientLabels);
    }
    let mut best_k = K_MIN;
    let mut best_t = f64::NEG_INFINITY;
    for k in k_grid() {
        let t = separation_t(scored, k);
        // Strict comparison keeps the smaller k on ties.
        if t > best_t {
            best_t = t;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Resolves the labeled pairs, compares them once, and picks `k` from the grid.
pub fn calibrate_k<S: TrackSource + ?Sized>(
    pairs: &[LabeledPair],
    source: &S,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<f64> {
    let similar = pairs.iter().filter(|p| p.label.is_similar()).count();
    if similar < 2 || pairs.len() - similar < 2 {
        return Err(Error::InsufficientLabels);
    }
    let scored = pairs
        .iter()
        .map(|p| {
            let a = p.a.resolve(source)?;
            let b = p.b.resolve(source)?;
            Ok((compare_tracks(&a, &b, items, cfg)?, p.label))
        })
        .collect::<Result<Vec<_>>>()?;
    calibrate_k_from_breakdowns(&scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn euclidean_examples() {
        let x = [0.3, -2.0, 5.0];
        assert_eq!(euclidean_rms(&x, &x).unwrap(), 0.0);
        let d = euclidean_rms(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((d - libm::sqrt(12.5)).abs() < 1e-15);
        assert!(matches!(euclidean_rms(&[0.0, 1.0], &[0.0, 1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn pearson_examples() {
        let x = [0.0, 1.0, 3.0, 7.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y, None, None).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg, None, None).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_constant_flags() {
        let z = [0.0; 4];
        let x = [1.0, 2.0, 0.0, 1.0];
        assert_eq!(pearson(&z, &x, Some(3.0), None).unwrap(), 0.0);
        assert_eq!(pearson(&x, &z, None, Some(3.0)).unwrap(), 0.0);
        assert_eq!(pearson(&z, &z, Some(3.0), Some(3.0 + 1e-12)).unwrap(), 1.0);
        assert_eq!(pearson(&z, &z, Some(3.0), Some(4.0)).unwrap(), 0.0);
    }

    #[test]
    fn similarity_score_examples() {
        assert_eq!(similarity_score(1.0, 0.0, 0.0, 7.0).unwrap(), 1.0);
        assert!((similarity_score(0.9, 0.4, 0.2, 4.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(similarity_score(0.5, 0.1, 0.1, 1.0), Err(Error::KOutOfRange(1.0)));
        assert_eq!(similarity_score(0.5, 0.1, 0.1, 10.5), Err(Error::KOutOfRange(10.5)));
    }

    #[test]
    fn k_grid_has_seventeen_points() {
        let g: Vec<f64> = k_grid().collect();
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 2.0);
        assert_eq!(g[16], 10.0);
    }

    #[test]
    fn calibrate_requires_both_classes() {
        let b = SimilarityBreakdown {
            per_channel: BTreeMap::new(),
            aggregate_ss: 1.0,
            aggregate_pc: 1.0,
            aggregate_ed: 0.0,
            aggregate_dtw: 0.0,
            missing_channels: vec![],
        };
        let only_similar = vec![(b.clone(), Label::Similar); 4];
        assert_eq!(calibrate_k_from_breakdowns(&only_similar), Err(Error::InsufficientLabels));
    }
}
