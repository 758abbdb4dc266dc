//! Track and channel domain types, validation, resampling and normalization.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identity of a track type. Two tracks are "same type" iff their keys are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackKey {
    pub spacecraft: String,
    pub antenna: String,
    pub comm_type: String,
}

impl TrackKey {
    pub fn new(spacecraft: &str, antenna: &str, comm_type: &str) -> Self {
        Self {
            spacecraft: spacecraft.to_string(),
            antenna: antenna.to_string(),
            comm_type: comm_type.to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.spacecraft.is_empty() {
            return Err(Error::EmptyKeyField("spacecraft"));
        }
        if self.antenna.is_empty() {
            return Err(Error::EmptyKeyField("antenna"));
        }
        if self.comm_type.is_empty() {
            return Err(Error::EmptyKeyField("comm_type"));
        }
        Ok(())
    }
}

/// One monitor data item within a track. Times are seconds since track start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSeries {
    pub channel_name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ChannelSeries {
    pub fn new(channel_name: &str, times: Vec<f64>, values: Vec<f64>) -> Self {
        Self { channel_name: channel_name.to_string(), times, values }
    }

    /// Series sampled at `0, dt, 2 dt, ...`.
    pub fn uniform(channel_name: &str, dt: f64, values: Vec<f64>) -> Self {
        let times = (0..values.len()).map(|i| i as f64 * dt).collect();
        Self::new(channel_name, times, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let channel = || self.channel_name.clone();
        if self.times.len() != self.values.len() {
            return Err(Error::RaggedSeries { times: self.times.len(), values: self.values.len() });
        }
        if self.values.len() < 2 {
            return Err(Error::EmptyChannel { channel: channel() });
        }
        for (index, (t, v)) in self.times.iter().zip(&self.values).enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite { channel: channel(), index });
            }
        }
        if let Some(index) = self.times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonicTime { channel: channel(), index: index + 1 });
        }
        Ok(())
    }
}

/// A multi-channel time-series block covering one communication session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: String,
    pub key: TrackKey,
    /// UTC seconds of the first sample.
    pub start_epoch: f64,
    pub channels: Vec<ChannelSeries>,
    /// Discrepancy Report ids attached to this track.
    #[serde(default)]
    pub dr_refs: Vec<String>,
}

impl Track {
    pub fn channel(&self, name: &str) -> Option<&ChannelSeries> {
        self.channels.iter().find(|c| c.channel_name == name)
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.channel_name.as_str())
    }
}

/// Returns the track unchanged iff every type invariant holds.
pub fn validate_track(raw: Track) -> Result<Track> {
    if raw.track_id.is_empty() {
        return Err(Error::EmptyTrackId);
    }
    raw.key.validate()?;
    if raw.channels.is_empty() {
        return Err(Error::NoChannels(raw.track_id));
    }
    for (i, ch) in raw.channels.iter().enumerate() {
        if raw.channels[..i].iter().any(|c| c.channel_name == ch.channel_name) {
            return Err(Error::DuplicateChannel { channel: ch.channel_name.clone() });
        }
        ch.validate()?;
    }
    Ok(raw)
}

/// Ordered, duplicate-free list of channel names that take part in comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct MonitorItemSet(Vec<String>);

/// The seven monitor data items selected by DSN operators.
pub const DEFAULT_MONITOR_ITEMS: [&str; 7] = [
    "carrier_power",
    "carrier_system_noise_temperature",
    "carrier_track_loop_lock_status",
    "subcarrier_track_loop_lock_status",
    "symbol_rate",
    "symbol_track_loop_state",
    "telemetry_frame_sync_lock_state",
];

impl MonitorItemSet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        Self::try_from(names)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for MonitorItemSet {
    fn default() -> Self {
        Self(DEFAULT_MONITOR_ITEMS.iter().map(|s| s.to_string()).collect())
    }
}

impl TryFrom<Vec<String>> for MonitorItemSet {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidConfig("monitor item set is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidConfig(alloc::format!("duplicate monitor item `{n}`")));
            }
        }
        Ok(Self(names))
    }
}

impl From<MonitorItemSet> for Vec<String> {
    fn from(set: MonitorItemSet) -> Self {
        set.0
    }
}

/// Similar/dissimilar ground truth for a track pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Similar,
    Dissimilar,
}

impl Label {
    pub fn is_similar(self) -> bool {
        matches!(self, Label::Similar)
    }
}

/// A track referenced by id (resolved through a [`TrackSource`]) or carried inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrackRef {
    Id(String),
    Inline(Box<Track>),
}

/// Track pair with operator ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: TrackRef,
    pub b: TrackRef,
    pub label: Label,
}

/// Anything that can hand out tracks by id (an archive, an in-memory map, ...).
pub trait TrackSource {
    fn track(&self, id: &str) -> Option<Track>;
}

impl TrackSource for [Track] {
    fn track(&self, id: &str) -> Option<Track> {
        self.iter().find(|t| t.track_id == id).cloned()
    }
}

impl TrackSource for Vec<Track> {
    fn track(&self, id: &str) -> Option<Track> {
        self.as_slice().track(id)
    }
}

impl TrackRef {
    pub fn resolve<S: TrackSource + ?Sized>(&self, source: &S) -> Result<Track> {
        match self {
            TrackRef::Id(id) => source.track(id).ok_or_else(|| Error::TrackNotFound(id.clone())),
            TrackRef::Inline(t) => Ok((**t).clone()),
        }
    }
}

/// Linear interpolation of `(times, values)` at `n` uniform times over
/// `[times[0], times[last]]`. Endpoints are copied exactly.
pub(crate) fn interpolate_uniform(times: &[f64], values: &[f64], n: usize) -> Vec<f64> {
    let first = times[0];
    let last = times[times.len() - 1];
    let span = last - first;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        if k == 0 {
            out.push(values[0]);
            continue;
        }
        if k == n - 1 {
            out.push(values[values.len() - 1]);
            continue;
        }
        let t = first + span * (k as f64) / ((n - 1) as f64);
        while seg + 2 < times.len() && times[seg + 1] <= t {
            seg += 1;
        }
        out.push(lerp(times[seg], values[seg], times[seg + 1], values[seg + 1], t));
    }
    out
}

#[inline]
pub(crate) fn lerp(t0: f64, v0: f64, t1: f64, v1: f64, t: f64) -> f64 {
    let w = (t - t0) / (t1 - t0);
    v0 + (v1 - v0) * w
}

/// Values linearly interpolated at `n` uniformly spaced times spanning the series.
pub fn resample_to_grid(s: &ChannelSeries, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::GridTooSmall(n));
    }
    if s.times.len() != s.values.len() {
        return Err(Error::RaggedSeries { times: s.times.len(), values: s.values.len() });
    }
    if s.len() < 2 {
        return Err(Error::EmptyChannel { channel: s.channel_name.clone() });
    }
    Ok(interpolate_uniform(&s.times, &s.values, n))
}

/// Output of [`zscore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    /// Mean of the input.
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator) of the input.
    pub std: f64,
    /// Set when `std < CONSTANT_STD`; `values` is then all zeros.
    pub constant: bool,
}

impl Normalized {
    /// The pre-normalization mean when the series is constant, for [`crate::metrics::pearson`].
    pub fn constant_mean(&self) -> Option<f64> {
        self.constant.then_some(self.mean)
    }
}

pub const CONSTANT_STD: f64 = 1e-12;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation with the n - 1 denominator.
pub fn sample_std(v: &[f64], mean: f64) -> f64 {
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    libm::sqrt(ss / (v.len() - 1) as f64)
}

/// Z-score normalization. Constant inputs yield zeros with the `constant` flag set.
pub fn zscore(v: &[f64]) -> Normalized {
    let m = mean(v);
    let sd = if v.len() > 1 { sample_std(v, m) } else { 0.0 };
    if sd < CONSTANT_STD {
        Normalized { values: v.iter().map(|x| x - m).collect(), mean: m, std: sd, constant: true }
    } else {
        Normalized { values: v.iter().map(|x| (x - m) / sd).collect(), mean: m, std: sd, constant: false }
    }
}
