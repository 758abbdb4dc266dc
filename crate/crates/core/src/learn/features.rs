use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metrics::{compare_tracks, MetricConfig, SimilarityBreakdown};
use crate::model::{LabeledPair, MonitorItemSet, TrackSource};
use crate::Result;

/// `(ed, dtw, pc)` per monitor item, in item order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Items absent from either track; their triple is `(0, 0, 0)`.
    pub missing: Vec<String>,
}

pub fn features_from_breakdown(b: &SimilarityBreakdown, items: &MonitorItemSet) -> FeatureVector {
    let mut values = Vec::with_capacity(3 * items.len());
    let mut missing = Vec::new();
    for name in items.iter() {
        match b.per_channel.get(name) {
            Some(m) => values.extend([m.ed, m.dtw, m.pc]),
            None => {
                values.extend([0.0, 0.0, 0.0]);
                missing.push(String::from(name));
            }
        }
    }
    FeatureVector { values, missing }
}

pub fn extract_features<S: TrackSource + ?Sized>(
    pair: &LabeledPair,
    source: &S,
    items: &MonitorItemSet,
    cfg: &MetricConfig,
) -> Result<FeatureVector> {
    let a = pair.a.resolve(source)?;
    let b = pair.b.resolve(source)?;
    let breakdown = compare_tracks(&a, &b, items, cfg)?;
    Ok(features_from_breakdown(&breakdown, items))
}
