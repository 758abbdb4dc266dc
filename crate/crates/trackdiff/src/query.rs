//! Read-side operations over a [`Snapshot`], shared by the HTTP service and
//! the CLI so both produce the same JSON for the same query.
//!
//! Stored tracks are compared through their hinge reconstructions. Tracks
//! passed inline are validated and compressed with the service budget first,
//! so they go through the same lossy path as stored ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trackdiff_core::analysis::{
    candidate_bound, detect_anomalies, rank_best_first, stat_diff, AnomalyInterval, RankedMatch, StatDiffReport,
};
use trackdiff_core::compression::{compress_track, fidelity_report, CompressedTrack, FidelityReport};
use trackdiff_core::metrics::{compare_tracks, MetricConfig, SimilarityBreakdown};
use trackdiff_core::model::{validate_track, TrackRef, TrackSource};
use trackdiff_core::{MonitorItemSet, Track};

use crate::error::{Error, Result};
use crate::store::Snapshot;

pub const DEFAULT_TOPK: usize = 10;
pub const DEFAULT_BUDGET: usize = 20;
pub const DEFAULT_THRESHOLD_Z: f64 = 3.0;
pub const DEFAULT_MIN_RUN: usize = 5;

/// Query context: a snapshot plus the metric defaults and inline-track budget.
pub struct Query<'a> {
    pub snap: &'a Snapshot,
    pub cfg: &'a MetricConfig,
    pub budget: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackFilter {
    pub spacecraft: Option<String>,
    pub antenna: Option<String>,
    pub comm_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub track_id: String,
    pub spacecraft: String,
    pub antenna: String,
    pub comm_type: String,
    pub start_epoch: f64,
    pub channels: Vec<String>,
    pub hinge_counts: Vec<usize>,
    pub dr_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRequest {
    pub a: TrackRef,
    pub b: TrackRef,
    #[serde(default)]
    pub items: Option<Vec<String>>,
    #[serde(default)]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkRequest {
    pub target: TrackRef,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub items: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRequest {
    pub target: TrackRef,
    pub reference: TrackRef,
    #[serde(default)]
    pub threshold_z: Option<f64>,
    #[serde(default)]
    pub min_run: Option<usize>,
    #[serde(default)]
    pub items: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDiffRequest {
    pub a: TrackRef,
    pub b: TrackRef,
    #[serde(default)]
    pub items: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRequest {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub items: Option<Vec<String>>,
}

fn items_of(items: &Option<Vec<String>>) -> Result<MonitorItemSet> {
    match items {
        Some(v) => Ok(MonitorItemSet::try_from(v.clone())?),
        None => Ok(MonitorItemSet::default()),
    }
}

impl<'a> Query<'a> {
    pub fn new(snap: &'a Snapshot, cfg: &'a MetricConfig, budget: usize) -> Self {
        Self { snap, cfg, budget }
    }

    pub fn list_tracks(&self, f: &TrackFilter) -> Vec<TrackSummary> {
        let keep = |want: &Option<String>, have: &str| want.as_deref().is_none_or(|w| w.is_empty() || w == have);
        let mut out: Vec<TrackSummary> = self
            .snap
            .entries()
            .iter()
            .filter(|e| {
                keep(&f.spacecraft, &e.key.spacecraft)
                    && keep(&f.antenna, &e.key.antenna)
                    && keep(&f.comm_type, &e.key.comm_type)
            })
            .map(|e| TrackSummary {
                track_id: e.track_id.clone(),
                spacecraft: e.key.spacecraft.clone(),
                antenna: e.key.antenna.clone(),
                comm_type: e.key.comm_type.clone(),
                start_epoch: e.start_epoch,
                channels: e.channels.clone(),
                hinge_counts: e.hinge_counts.clone(),
                dr_refs: e.dr_refs.clone(),
                flags: e.flags.clone(),
            })
            .collect();
        out.sort_by(|a, b| b.start_epoch.total_cmp(&a.start_epoch).then_with(|| a.track_id.cmp(&b.track_id)));
        out
    }

    /// Stored track reconstructed on `grid_n` points per channel.
    pub fn track_series(&self, id: &str, grid_n: Option<usize>) -> Result<Track> {
        Ok(self.snap.get(id)?.reconstruct(grid_n.unwrap_or(self.cfg.grid_n))?)
    }

    fn compressed(&self, r: &TrackRef) -> Result<CompressedTrack> {
        match r {
            TrackRef::Id(id) => Ok(self.snap.get(id)?.clone()),
            TrackRef::Inline(t) => {
                let t = validate_track((**t).clone())?;
                Ok(compress_track(&t, self.budget, 0.0)?)
            }
        }
    }

    fn on_grid(&self, r: &TrackRef) -> Result<Track> {
        Ok(self.compressed(r)?.reconstruct(self.cfg.grid_n)?)
    }

    fn full(&self, r: &TrackRef) -> Result<Track> {
        Ok(self.compressed(r)?.reconstruct_full()?)
    }

    pub fn compare(&self, req: &CompareRequest) -> Result<SimilarityBreakdown> {
        let items = items_of(&req.items)?;
        let cfg = match req.k {
            Some(k) => self.cfg.clone().with_k(k),
            None => self.cfg.clone(),
        };
        cfg.validate()?;
        Ok(compare_tracks(&self.on_grid(&req.a)?, &self.on_grid(&req.b)?, &items, &cfg)?)
    }

    /// Ranks every stored track of the target's type (except the target).
    pub fn topk(&self, req: &TopkRequest) -> Result<Vec<RankedMatch>> {
        let items = items_of(&req.items)?;
        let k = req.k.unwrap_or(DEFAULT_TOPK);
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        self.cfg.validate()?;
        let target = self.on_grid(&req.target)?;
        let ids = self.snap.query_same_type(&target.key);
        // Reconstruction and the DTW-free bounds are independent per candidate.
        let cands = ids
            .par_iter()
            .filter(|id| **id != target.track_id)
            .map(|id| {
                let cand = self.snap.get(id)?.reconstruct(self.cfg.grid_n)?;
                let ub = candidate_bound(&target, &cand, &items, self.cfg)?;
                Ok(ub.map(|ub| (cand, ub)))
            })
            .collect::<Result<Vec<_>>>()?;
        let bounded = cands.iter().flatten().map(|(c, ub)| (c, *ub)).collect();
        Ok(rank_best_first(&target, bounded, k, &items, self.cfg)?)
    }

    pub fn anomalies(&self, req: &AnomalyRequest) -> Result<Vec<AnomalyInterval>> {
        let items = items_of(&req.items)?;
        Ok(detect_anomalies(
            &self.full(&req.target)?,
            &self.full(&req.reference)?,
            req.threshold_z.unwrap_or(DEFAULT_THRESHOLD_Z),
            req.min_run.unwrap_or(DEFAULT_MIN_RUN),
            &items,
            self.cfg,
        )?)
    }

    pub fn statdiff(&self, req: &StatDiffRequest) -> Result<StatDiffReport> {
        let items = items_of(&req.items)?;
        Ok(stat_diff(&self.full(&req.a)?, &self.full(&req.b)?, &items)?)
    }

    /// Raw-versus-compressed similarity; needs raw sidecars for both tracks.
    pub fn fidelity(&self, req: &FidelityRequest) -> Result<FidelityReport> {
        let items = items_of(&req.items)?;
        let raw = |id: &str| self.snap.read_raw(id)?.ok_or_else(|| Error::RawUnavailable(id.to_string()));
        let (a, b) = (raw(&req.a)?, raw(&req.b)?);
        Ok(fidelity_report(&a, &b, req.budget.unwrap_or(self.budget), &items, self.cfg)?)
    }

    /// Stored tracks by id, reconstructed on the metric grid.
    pub fn source(&self) -> GridSource<'_> {
        GridSource { snap: self.snap, grid_n: self.cfg.grid_n }
    }
}

/// [`TrackSource`] view of a snapshot handing out grid reconstructions.
pub struct GridSource<'a> {
    snap: &'a Snapshot,
    grid_n: usize,
}

impl TrackSource for GridSource<'_> {
    fn track(&self, id: &str) -> Option<Track> {
        self.snap.get(id).ok()?.reconstruct(self.grid_n).ok()
    }
}
