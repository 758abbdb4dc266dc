use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::model::{mean, sample_std, MonitorItemSet, Track};
use crate::stats::welch_from_moments;
use crate::{Error, Result};

/// Welch two-sample comparison of one channel's raw values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStatDiff {
    pub t_stat: f64,
    pub dof: f64,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub std_a: f64,
    pub std_b: f64,
    /// `min(a) - min(b)`
    pub min_delta: f64,
    /// `max(a) - max(b)`
    pub max_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDiffReport {
    pub per_channel: BTreeMap<String, ChannelStatDiff>,
}

pub fn stat_diff(a: &Track, b: &Track, items: &MonitorItemSet) -> Result<StatDiffReport> {
    let mut per_channel = BTreeMap::new();
    for name in items.iter() {
        let (Some(ca), Some(cb)) = (a.channel(name), b.channel(name)) else {
            continue;
        };
        let (va, vb) = (&ca.values, &cb.values);
        if va.len() < 2 || vb.len() < 2 {
            return Err(Error::EmptyChannel { channel: String::from(name) });
        }
        let (ma, mb) = (mean(va), mean(vb));
        let (sa, sb) = (sample_std(va, ma), sample_std(vb, mb));
        let w = welch_from_moments(ma, sa, va.len() as f64, mb, sb, vb.len() as f64);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        per_channel.insert(
            String::from(name),
            ChannelStatDiff {
                t_stat: w.t_stat,
                dof: w.dof,
                p_value: w.p_value,
                mean_a: ma,
                mean_b: mb,
                std_a: sa,
                std_b: sb,
                min_delta: min(va) - min(vb),
                max_delta: max(va) - max(vb),
            },
        );
    }
    if per_channel.is_empty() {
        return Err(Error::NoSharedChannels);
    }
    Ok(StatDiffReport { per_channel })
}
