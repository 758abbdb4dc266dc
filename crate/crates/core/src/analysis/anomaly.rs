use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metrics::{dtw_path, MetricConfig};
use crate::model::{zscore, MonitorItemSet, Track};
use crate::{Error, Result};

/// A span of target samples deviating from the reference.
///
/// Covers samples `start_index..end_index`; `start_t` is the first flagged
/// sample's time and `end_t` the time of the sample just after the span
/// (extrapolated by one sample period at the end of the series).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyInterval {
    pub channel_name: String,
    pub start_t: f64,
    pub end_t: f64,
    pub start_index: usize,
    pub end_index: usize,
    /// Largest z-residual in the interval.
    pub severity: f64,
    pub mean_residual: f64,
}

/// DTW-aligned z-residual thresholding of `target` against `reference`.
///
/// For every target sample the residual is the mean absolute difference to
/// the reference samples it is matched with on the optimal warping path.
/// Runs of at least `min_run` samples above `threshold_z` are flagged and
/// runs separated by fewer than `min_run` samples are merged.
pub fn detect_anomalies(
    target: &Track,
    reference: &Track,
    threshold_z: f64,
    min_run: usize,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<Vec<AnomalyInterval>> {
    if !(threshold_z > 0.0) {
        return Err(Error::InvalidArgument("threshold_z must be positive".into()));
    }
    if min_run == 0 {
        return Err(Error::InvalidArgument("min_run must be at least 1".into()));
    }
    let mut out = Vec::new();
    let mut shared = 0;
    for name in items.iter() {
        let (Some(tc), Some(rc)) = (target.channel(name), reference.channel(name)) else {
            continue;
        };
        shared += 1;
        let zt = zscore(&tc.values);
        let zr = zscore(&rc.values);
        let path = dtw_path(&zt.values, &zr.values, cfg.dtw_band_frac)?;
        let mut sum = vec![0.0f64; zt.values.len()];
        let mut count = vec![0u32; zt.values.len()];
        for &(i, j) in &path.cells {
            sum[i] += (zt.values[i] - zr.values[j]).abs();
            count[i] += 1;
        }
        let residuals: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
        for (s, e) in residual_runs(&residuals, threshold_z, min_run) {
            let span = &residuals[s..e];
            let end_t = if e < tc.times.len() {
                tc.times[e]
            } else {
                let n = tc.times.len();
                tc.times[n - 1] + (tc.times[n - 1] - tc.times[n - 2])
            };
            out.push(AnomalyInterval {
                channel_name: String::from(name),
                start_t: tc.times[s],
                end_t,
                start_index: s,
                end_index: e,
                severity: span.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_residual: span.iter().sum::<f64>() / span.len() as f64,
            });
        }
    }
    if shared == 0 {
        return Err(Error::NoSharedChannels);
    }
    Ok(out)
}

/// Half-open index ranges of flagged runs after the length filter and gap merge.
pub fn residual_runs(residuals: &[f64], threshold: f64, min_run: usize) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &r) in residuals.iter().enumerate() {
        match (r > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, residuals.len()));
    }
    runs.retain(|(s, e)| e - s >= min_run);
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for (s, e) in runs {
        match merged.last_mut() {
            Some(last) if s - last.1 < min_run => last.1 = e,
            _ => merged.push((s, e)),
        }
    }
    merged
}
