use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::metrics::{compare_tracks, ss_upper_bound, MetricConfig, SimilarityBreakdown};
use crate::model::{MonitorItemSet, Track};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub track_id: String,
    pub aggregate_ss: f64,
    pub breakdown: SimilarityBreakdown,
    pub dr_refs: Vec<String>,
}

fn by_rank(a: &RankedMatch, b: &RankedMatch) -> Ordering {
    b.aggregate_ss.total_cmp(&a.aggregate_ss).then_with(|| a.track_id.cmp(&b.track_id))
}

/// Sorts by aggregate SS descending (ties by id ascending) and keeps the first `k`.
pub fn rank_scored(mut matches: Vec<RankedMatch>, k: usize) -> Vec<RankedMatch> {
    matches.sort_by(by_rank);
    matches.truncate(k);
    matches
}

/// The `k` candidates most similar to `target`.
///
/// Candidates with the target's id are skipped, as are candidates sharing no
/// monitored channel with it. An empty candidate set yields an empty list.
/// The result equals scoring every candidate and sorting; see
/// [`rank_best_first`] for how DTW work is avoided.
pub fn topk_similar<'a, I>(
    target: &Track,
    candidates: I,
    k: usize,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<Vec<RankedMatch>>
where
    I: IntoIterator<Item = &'a Track>,
{
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    cfg.validate()?;
    let mut bounded = Vec::new();
    for cand in candidates {
        if cand.track_id == target.track_id {
            continue;
        }
        if let Some(ub) = candidate_bound(target, cand, items, cfg)? {
            bounded.push((cand, ub));
        }
    }
    rank_best_first(target, bounded, k, items, cfg)
}

/// [`ss_upper_bound`] of one candidate; `None` when it shares no channel with the target.
pub fn candidate_bound(target: &Track, cand: &Track, items: &MonitorItemSet, cfg: &MetricConfig) -> Result<Option<f64>> {
    match ss_upper_bound(target, cand, items, cfg) {
        Ok(ub) => Ok(Some(ub)),
        Err(Error::NoSharedChannels) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Exact top-`k` from candidates paired with upper bounds on their score.
///
/// Candidates are visited in decreasing bound order and fully scored until
/// the next bound falls strictly below the current `k`-th score; no later
/// candidate can then enter the result, even on an id tie-break.
pub fn rank_best_first(
    target: &Track,
    mut bounded: Vec<(&Track, f64)>,
    k: usize,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<Vec<RankedMatch>> {
    bounded.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.track_id.cmp(&b.0.track_id)));
    let mut kept: Vec<RankedMatch> = Vec::with_capacity(k + 1);
    for (cand, ub) in bounded {
        if kept.len() >= k && ub < kept[k - 1].aggregate_ss {
            break;
        }
        if let Some(m) = score_candidate(target, cand, items, cfg)? {
            let at = kept.partition_point(|x| by_rank(x, &m) == Ordering::Less);
            kept.insert(at, m);
            kept.truncate(k);
        }
    }
    Ok(kept)
}

/// Compares one candidate; `None` when it shares no channel with the target.
pub fn score_candidate(
    target: &Track,
    cand: &Track,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<Option<RankedMatch>> {
    match compare_tracks(target, cand, items, cfg) {
        Ok(breakdown) => Ok(Some(RankedMatch {
            track_id: cand.track_id.clone(),
            aggregate_ss: breakdown.aggregate_ss,
            breakdown,
            dr_refs: cand.dr_refs.clone(),
        })),
        Err(Error::NoSharedChannels) => Ok(None),
        Err(e) => Err(e),
    }
}
