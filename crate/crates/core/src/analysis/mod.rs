//! Operator-facing analyses: similar-track retrieval, anomaly detection
//! against a reference track, statistical difference reports, and the
//! synthetic generators used to validate them.

mod anomaly;
mod statdiff;
mod synth;
mod topk;

pub use anomaly::{detect_anomalies, residual_runs, AnomalyInterval};
pub use statdiff::{stat_diff, ChannelStatDiff, StatDiffReport};
pub use synth::{synth_key, synth_mixed_pair, synth_pair, synth_spike_track, Spike, SpikeTrackSpec, SynthPairSpec};
pub use topk::{candidate_bound, rank_best_first, rank_scored, score_candidate, topk_similar, RankedMatch};
