//! Seeded synthetic tracks.
//!
//! Base signals are slow trends: three random-phase sinusoids (1 to 6
//! cycles per track) plus two ramps switching on at random times. Noise is
//! Gaussian, scaled per channel so that `signal_power / noise_power == snr`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::{mean, ChannelSeries, MonitorItemSet, Track, TrackKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthPairSpec {
    /// Samples per channel.
    pub length: usize,
    /// Signal-to-noise power ratio, > 0.
    pub snr: f64,
    /// Share the base signal between the two tracks.
    pub correlated: bool,
    pub seed: u64,
}

pub fn synth_key() -> TrackKey {
    TrackKey::new("SYNTH-1", "DSS-55", "downlink")
}

fn base_signal(rng: &mut ChaCha8Rng, length: usize) -> Vec<f64> {
    let l = length as f64;
    let sines: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(0.5..1.5), rng.random_range(1.0..6.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let ramps: Vec<(f64, f64)> = (0..2).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..l))).collect();
    (0..length)
        .map(|i| {
            let t = i as f64;
            let s: f64 = sines.iter().map(|&(a, f, p)| a * libm::sin(2.0 * PI * f * t / l + p)).sum();
            let r: f64 = ramps.iter().map(|&(slope, start)| if t > start { slope * (t - start) / l } else { 0.0 }).sum();
            s + r
        })
        .collect()
}

fn power(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn add_noise(rng: &mut ChaCha8Rng, signal: &[f64], snr: f64) -> Vec<f64> {
    let sd = libm::sqrt(power(signal) / snr);
    signal
        .iter()
        .map(|s| {
            let z: f64 = rng.sample(StandardNormal);
            s + sd * z
        })
        .collect()
}

fn standardized(v: Vec<f64>) -> Vec<f64> {
    let m = mean(&v);
    let sd = libm::sqrt(power(&v));
    v.into_iter().map(|x| (x - m) / sd).collect()
}

fn make_track(id: String, channels: Vec<ChannelSeries>) -> Track {
    Track { track_id: id, key: synth_key(), start_epoch: 0.0, channels, dr_refs: Vec::new() }
}

/// Pair of 7-channel tracks, 1 s sampling. Deterministic under `spec.seed`.
pub fn synth_pair(spec: &SynthPairSpec) -> (Track, Track) {
    let mix = if spec.correlated { 1.0 } else { 0.0 };
    synth_mixed_pair(spec, mix)
}

/// Like [`synth_pair`], but the second track's base signal is
/// `rho * base_a + sqrt(1 - rho^2) * independent` (both standardized), so
/// the pair's correlation can be steered anywhere in `[-1, 1]`.
/// `spec.correlated` is ignored.
pub fn synth_mixed_pair(spec: &SynthPairSpec, rho: f64) -> (Track, Track) {
    let rho = rho.clamp(-1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let items = MonitorItemSet::default();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    for name in items.iter() {
        let base_a = standardized(base_signal(&mut rng, spec.length));
        let base_b = if rho == 1.0 {
            base_a.clone()
        } else {
            let other = standardized(base_signal(&mut rng, spec.length));
            let c = libm::sqrt(1.0 - rho * rho);
            base_a.iter().zip(&other).map(|(a, o)| rho * a + c * o).collect()
        };
        ca.push(ChannelSeries::uniform(name, 1.0, add_noise(&mut rng, &base_a, spec.snr)));
        cb.push(ChannelSeries::uniform(name, 1.0, add_noise(&mut rng, &base_b, spec.snr)));
    }
    (
        make_track(format!("synth-{}-a", spec.seed), ca),
        make_track(format!("synth-{}-b", spec.seed), cb),
    )
}

/// Triangular spike added on top of the trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    /// Sample index of the peak.
    pub center: usize,
    /// Half-width in samples.
    pub half_width: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrackSpec {
    pub length: usize,
    pub spikes: Vec<Spike>,
    /// Gaussian noise standard deviation, relative to a unit-scale trend.
    pub noise_std: f64,
    /// Seeds the trend parameters.
    pub seed: u64,
    /// Seeds the noise realization.
    pub noise_seed: u64,
}

/// Single-channel track: slow trend (offset, ramp, half-to-one-and-a-half
/// cycle sinusoid) with triangular spikes and light noise. Resembles an AGC
/// power trace over a pass.
pub fn synth_spike_track(spec: &SpikeTrackSpec, track_id: &str, channel: &str) -> Track {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = spec.length as f64;
    let offset: f64 = rng.random_range(-1.0..1.0);
    let slope: f64 = rng.random_range(-1.0..1.0);
    let amp: f64 = rng.random_range(0.5..1.0);
    let cycles: f64 = rng.random_range(0.5..1.5);
    let phase: f64 = rng.random_range(0.0..2.0 * PI);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let mut values: Vec<f64> = (0..spec.length)
        .map(|i| {
            let t = i as f64 / l;
            let z: f64 = noise_rng.sample(StandardNormal);
            offset + slope * t + amp * libm::sin(2.0 * PI * cycles * t + phase) + spec.noise_std * z
        })
        .collect();
    for s in &spec.spikes {
        let lo = s.center.saturating_sub(s.half_width);
        let hi = (s.center + s.half_width).min(spec.length - 1);
        for (i, v) in values.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = (i as f64 - s.center as f64).abs() / s.half_width.max(1) as f64;
            *v += s.height * (1.0 - d).max(0.0);
        }
    }
    make_track(String::from(track_id), alloc::vec![ChannelSeries::uniform(channel, 1.0, values)])
}
