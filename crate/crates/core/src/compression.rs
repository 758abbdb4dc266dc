//! Continuous piecewise-linear least-squares compression.
//!
//! A channel is stored as a list of hinge vertices `(t, v)`. Between hinges
//! the reconstruction is the straight line through the two vertices, so the
//! representation is continuous by construction. Hinge values are the
//! least-squares solution over all raw samples: each sample's fitted value
//! is a convex combination of the two bracketing hinge values, which makes
//! the normal equations tridiagonal.
//!
//! Hinge times are chosen top-down: start from the two end samples and
//! split at the sample deviating most from its interval's chord until the
//! budget or the residual tolerance is reached.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metrics::{compare_tracks, MetricConfig, SimilarityBreakdown};
use crate::model::{interpolate_uniform, lerp, validate_track, ChannelSeries, MonitorItemSet, Track, TrackKey};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hinge {
    pub t: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedChannel {
    pub channel_name: String,
    pub hinges: Vec<Hinge>,
    /// Number of raw samples the fit was computed from.
    pub raw_points: u32,
    /// RMS of the fit residuals over the raw samples.
    pub fit_rms: f64,
    pub max_abs_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub hinge_count: usize,
    pub raw_points: usize,
    /// `raw_points / hinge_count`.
    pub ratio: f64,
    pub max_abs_residual: f64,
    pub fit_rms: f64,
}

impl CompressedChannel {
    pub fn report(&self) -> CompressionReport {
        let hinge_count = self.hinges.len();
        let raw_points = self.raw_points as usize;
        CompressionReport {
            hinge_count,
            raw_points,
            ratio: raw_points as f64 / hinge_count as f64,
            max_abs_residual: self.max_abs_residual,
            fit_rms: self.fit_rms,
        }
    }

    /// Value of the piecewise-linear interpolant at `t` (clamped to the hinge span).
    pub fn eval(&self, t: f64) -> f64 {
        let h = &self.hinges;
        if t <= h[0].t {
            return h[0].v;
        }
        let last = h.len() - 1;
        if t >= h[last].t {
            return h[last].v;
        }
        let j = h.partition_point(|p| p.t <= t) - 1;
        lerp(h[j].t, h[j].v, h[j + 1].t, h[j + 1].v, t)
    }

    /// Reconstruction as a series on a uniform grid of `grid_n` points.
    pub fn to_series(&self, grid_n: usize) -> Result<ChannelSeries> {
        let values = reconstruct(self, grid_n)?;
        let (t0, t1) = (self.hinges[0].t, self.hinges[self.hinges.len() - 1].t);
        let times = (0..grid_n)
            .map(|k| if k + 1 == grid_n { t1 } else { t0 + (t1 - t0) * k as f64 / (grid_n - 1) as f64 })
            .collect();
        Ok(ChannelSeries { channel_name: self.channel_name.clone(), times, values })
    }
}

/// Fitted hinge values plus per-sample residuals (`value - fit`).
#[derive(Debug, Clone, PartialEq)]
pub struct HingeFit {
    pub channel: CompressedChannel,
    pub residuals: Vec<f64>,
}

/// Least-squares hinge values for the given knot times.
///
/// Interior knots whose closed interval holds fewer than two samples are
/// dropped before fitting, so the returned hinge list may be shorter than
/// `knot_times`.
pub fn fit_hinges(s: &ChannelSeries, knot_times: &[f64]) -> Result<CompressedChannel> {
    fit_hinges_detailed(s, knot_times).map(|f| f.channel)
}

pub fn fit_hinges_detailed(s: &ChannelSeries, knot_times: &[f64]) -> Result<HingeFit> {
    s.validate()?;
    let (first, last) = (s.times[0], s.times[s.len() - 1]);
    if knot_times.len() < 2 {
        return Err(Error::KnotSpan { first, last });
    }
    if knot_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::UnsortedKnots);
    }
    let tol = 1e-9 * (last - first).abs().max(1.0);
    if (knot_times[0] - first).abs() > tol || (knot_times[knot_times.len() - 1] - last).abs() > tol {
        return Err(Error::KnotSpan { first, last });
    }
    let mut knots = knot_times.to_vec();
    knots[0] = first;
    let kl = knots.len() - 1;
    knots[kl] = last;
    drop_unsupported_knots(&s.times, &mut knots);
    solve_fit(s, &knots)
}

/// Removes interior knots until every knot interval holds at least two samples.
fn drop_unsupported_knots(times: &[f64], knots: &mut Vec<f64>) {
    loop {
        let mut bad = None;
        for j in 0..knots.len() - 1 {
            let lo = times.partition_point(|&t| t < knots[j]);
            let hi = times.partition_point(|&t| t <= knots[j + 1]);
            if hi - lo < 2 {
                bad = Some(j);
                break;
            }
        }
        match bad {
            None => return,
            Some(j) => {
                // Merge into the neighbouring interval by removing an interior endpoint.
                let remove = if j + 1 < knots.len() - 1 { j + 1 } else { j };
                if remove == 0 || remove == knots.len() - 1 {
                    return;
                }
                knots.remove(remove);
            }
        }
    }
}

fn solve_fit(s: &ChannelSeries, knots: &[f64]) -> Result<HingeFit> {
    let k = knots.len();
    let mut diag = vec![0.0f64; k];
    let mut off = vec![0.0f64; k - 1];
    let mut rhs = vec![0.0f64; k];
    let mut seg = 0usize;
    // (interval index, weight on the left knot) per sample
    let mut placement = Vec::with_capacity(s.len());
    for (&t, &y) in s.times.iter().zip(&s.values) {
        while seg + 2 < k && knots[seg + 1] <= t {
            seg += 1;
        }
        let a = (knots[seg + 1] - t) / (knots[seg + 1] - knots[seg]);
        let b = 1.0 - a;
        diag[seg] += a * a;
        diag[seg + 1] += b * b;
        off[seg] += a * b;
        rhs[seg] += a * y;
        rhs[seg + 1] += b * y;
        placement.push((seg, a));
    }
    let v = solve_tridiagonal(&diag, &off, &rhs)?;
    let mut residuals = Vec::with_capacity(s.len());
    let mut sq = 0.0;
    let mut max_abs = 0.0f64;
    for ((seg, a), &y) in placement.into_iter().zip(&s.values) {
        let fit = a * v[seg] + (1.0 - a) * v[seg + 1];
        let r = y - fit;
        sq += r * r;
        max_abs = max_abs.max(r.abs());
        residuals.push(r);
    }
    let hinges = knots.iter().zip(&v).map(|(&t, &v)| Hinge { t, v }).collect();
    Ok(HingeFit {
        channel: CompressedChannel {
            channel_name: s.channel_name.clone(),
            hinges,
            raw_points: s.len() as u32,
            fit_rms: libm::sqrt(sq / s.len() as f64),
            max_abs_residual: max_abs,
        },
        residuals,
    })
}

/// Thomas algorithm for a symmetric tridiagonal system.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let eps = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut c = vec![0.0f64; n];
    let mut d = vec![0.0f64; n];
    let mut denom = diag[0];
    if denom.abs() <= eps {
        return Err(Error::SingularFit);
    }
    if n > 1 {
        c[0] = off[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if denom.abs() <= eps {
            return Err(Error::SingularFit);
        }
        if i < n - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Greedy top-down knot selection.
///
/// Starts from the end samples and repeatedly splits at the sample deviating
/// most from the chord through its interval's end samples, stopping at
/// `budget` knots or once the least-squares fit's max residual is within
/// `tol`. Knots are always sample times.
pub fn choose_knots_greedy(s: &ChannelSeries, budget: usize, tol: f64) -> Result<Vec<f64>> {
    s.validate()?;
    if budget < 2 {
        return Err(Error::InvalidArgument(alloc::format!("hinge budget {budget} < 2")));
    }
    let n = s.len();
    if budget >= n {
        return Ok(s.times.clone());
    }
    // Knot sample indices, and per interval (left knot position) its worst sample.
    let mut knot_idx = vec![0usize, n - 1];
    let mut worst = vec![chord_deviation(s, 0, n - 1)];
    let knots_of = |idx: &[usize]| idx.iter().map(|&i| s.times[i]).collect::<Vec<f64>>();
    loop {
        if knot_idx.len() >= budget {
            break;
        }
        if tol > 0.0 && solve_fit(s, &knots_of(&knot_idx))?.channel.max_abs_residual <= tol {
            break;
        }
        let Some((pos, (split, _))) = worst
            .iter()
            .enumerate()
            .filter_map(|(p, w)| w.map(|w| (p, w)))
            .fold(None, |best: Option<(usize, (usize, f64))>, (p, w)| match best {
                Some((_, (_, b))) if b >= w.1 => best,
                _ => Some((p, w)),
            })
        else {
            break;
        };
        let (left, right) = (knot_idx[pos], knot_idx[pos + 1]);
        knot_idx.insert(pos + 1, split);
        worst[pos] = chord_deviation(s, left, split);
        worst.insert(pos + 1, chord_deviation(s, split, right));
    }
    Ok(knots_of(&knot_idx))
}

/// Interior sample of `lo..=hi` farthest from the chord through the end samples.
fn chord_deviation(s: &ChannelSeries, lo: usize, hi: usize) -> Option<(usize, f64)> {
    let (t0, v0, t1, v1) = (s.times[lo], s.values[lo], s.times[hi], s.values[hi]);
    let mut best: Option<(usize, f64)> = None;
    for i in lo + 1..hi {
        let d = (s.values[i] - lerp(t0, v0, t1, v1, s.times[i])).abs();
        if best.is_none_or(|(_, b)| d > b) {
            best = Some((i, d));
        }
    }
    best
}

/// Greedy knots followed by the final least-squares fit.
pub fn compress_channel(s: &ChannelSeries, budget: usize, tol: f64) -> Result<CompressedChannel> {
    let knots = choose_knots_greedy(s, budget, tol)?;
    fit_hinges(s, &knots)
}

/// A track reduced to hinge vertices; raw samples are not retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedTrack {
    pub track_id: String,
    pub key: TrackKey,
    pub start_epoch: f64,
    pub dr_refs: Vec<String>,
    pub channels: Vec<CompressedChannel>,
}

impl CompressedTrack {
    pub fn channel(&self, name: &str) -> Option<&CompressedChannel> {
        self.channels.iter().find(|c| c.channel_name == name)
    }

    pub fn reports(&self) -> Vec<(String, CompressionReport)> {
        self.channels.iter().map(|c| (c.channel_name.clone(), c.report())).collect()
    }

    /// Track whose channels are the reconstructions on `grid_n` uniform points.
    pub fn reconstruct(&self, grid_n: usize) -> Result<Track> {
        self.reconstruct_with(|_| grid_n)
    }

    /// Track whose channels are reconstructed at their raw sample counts.
    pub fn reconstruct_full(&self) -> Result<Track> {
        self.reconstruct_with(|c| (c.raw_points as usize).max(2))
    }

    fn reconstruct_with(&self, n: impl Fn(&CompressedChannel) -> usize) -> Result<Track> {
        let channels = self.channels.iter().map(|c| c.to_series(n(c))).collect::<Result<Vec<_>>>()?;
        Ok(Track {
            track_id: self.track_id.clone(),
            key: self.key.clone(),
            start_epoch: self.start_epoch,
            channels,
            dr_refs: self.dr_refs.clone(),
        })
    }
}

/// Compresses every channel of a validated track.
pub fn compress_track(t: &Track, budget_per_channel: usize, tol: f64) -> Result<CompressedTrack> {
    let t = validate_track(t.clone())?;
    let channels = t
        .channels
        .iter()
        .map(|c| compress_channel(c, budget_per_channel, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompressedTrack {
        track_id: t.track_id,
        key: t.key,
        start_epoch: t.start_epoch,
        dr_refs: t.dr_refs,
        channels,
    })
}

/// Piecewise-linear interpolant on `grid_n` uniform times over the hinge span.
pub fn reconstruct(c: &CompressedChannel, grid_n: usize) -> Result<Vec<f64>> {
    if grid_n < 2 {
        return Err(Error::GridTooSmall(grid_n));
    }
    if c.hinges.len() < 2 {
        return Err(Error::SeriesTooShort(c.hinges.len()));
    }
    let times: Vec<f64> = c.hinges.iter().map(|h| h.t).collect();
    let values: Vec<f64> = c.hinges.iter().map(|h| h.v).collect();
    Ok(interpolate_uniform(&times, &values, grid_n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub budget: usize,
    pub raw: SimilarityBreakdown,
    pub compressed: SimilarityBreakdown,
}

/// Similarity of two raw tracks next to the similarity of their compressed
/// reconstructions (evaluated at the raw sample counts).
pub fn fidelity_report(
    a_raw: &Track,
    b_raw: &Track,
    budget: usize,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<FidelityReport> {
    let raw = compare_tracks(a_raw, b_raw, items, cfg)?;
    let compressed = fidelity_compressed(a_raw, b_raw, budget, items, cfg)?;
    Ok(FidelityReport { budget, raw, compressed })
}

/// The compressed half of [`fidelity_report`], for sweeps that reuse the raw breakdown.
pub fn fidelity_compressed(
    a_raw: &Track,
    b_raw: &Track,
    budget: usize,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<SimilarityBreakdown> {
    let ca = compress_track(a_raw, budget, 0.0)?.reconstruct_full()?;
    let cb = compress_track(b_raw, budget, 0.0)?.reconstruct_full()?;
    compare_tracks(&ca, &cb, items, cfg)
}
