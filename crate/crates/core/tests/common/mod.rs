#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackdiff_core::analysis::synth_key;
use trackdiff_core::{ChannelSeries, Track};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn track(id: &str, channels: Vec<ChannelSeries>) -> Track {
    Track { track_id: id.into(), key: synth_key(), start_epoch: 0.0, channels, dr_refs: vec![] }
}

/// Random-walk channel, 1 s sampling.
pub fn walk(rng: &mut ChaCha8Rng, name: &str, n: usize) -> ChannelSeries {
    let mut v = 0.0;
    let values = (0..n)
        .map(|_| {
            v += rng.random_range(-1.0..1.0);
            v
        })
        .collect();
    ChannelSeries::uniform(name, 1.0, values)
}

pub fn naive_mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

pub fn naive_var(v: &[f64]) -> f64 {
    let m = naive_mean(v);
    let mut s = 0.0;
    for x in v {
        s += (x - m) * (x - m);
    }
    s / (v.len() - 1) as f64
}
