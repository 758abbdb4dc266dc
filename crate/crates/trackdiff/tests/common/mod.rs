#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackdiff::ingest::StreamRecord;
use trackdiff_core::compression::{CompressedChannel, CompressedTrack, Hinge};
use trackdiff_core::model::DEFAULT_MONITOR_ITEMS;
use trackdiff_core::{ChannelSeries, Track, TrackKey};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn key(i: usize) -> TrackKey {
    let sc = ["VGR1", "VGR2", "MRO"][i % 3];
    let ant = ["DSS-14", "DSS-43"][i % 2];
    TrackKey::new(sc, ant, "downlink")
}

/// Random compressed track with awkward-but-finite floats, for bit-exact roundtrips.
pub fn random_compressed(r: &mut ChaCha8Rng, id: &str, key: TrackKey, channels: usize, hinges: usize) -> CompressedTrack {
    let odd = [-0.0, f64::MIN_POSITIVE, 5e-324, f64::MAX, -1e300, 0.1 + 0.2];
    let channels = (0..channels)
        .map(|c| {
            let mut t = 0.0;
            let hinges = (0..hinges)
                .map(|_| {
                    t += r.random_range(0.5..50.0);
                    let v = if r.random_bool(0.1) { odd[r.random_range(0..odd.len())] } else { r.random_range(-200.0..200.0) };
                    Hinge { t, v }
                })
                .collect();
            CompressedChannel {
                channel_name: DEFAULT_MONITOR_ITEMS.get(c).map_or_else(|| format!("ch{c}"), |s| s.to_string()),
                hinges,
                raw_points: r.random_range(2..20_000),
                fit_rms: r.random::<f64>(),
                max_abs_residual: r.random::<f64>() * 3.0,
            }
        })
        .collect();
    CompressedTrack {
        track_id: id.to_string(),
        key,
        start_epoch: 1.6e9 + r.random_range(0.0..3e8),
        dr_refs: (0..r.random_range(0..3)).map(|i| format!("DR-{i}-{id}")).collect(),
        channels,
    }
}

/// Raw track with `n` samples per default monitor item, 1 s sampling.
pub fn raw_track(r: &mut ChaCha8Rng, id: &str, key: TrackKey, n: usize) -> Track {
    let channels = DEFAULT_MONITOR_ITEMS
        .iter()
        .map(|name| {
            let mut v = 0.0;
            let values = (0..n)
                .map(|_| {
                    v += r.random_range(-1.0..1.0);
                    v
                })
                .collect();
            ChannelSeries::uniform(name, 1.0, values)
        })
        .collect();
    Track { track_id: id.to_string(), key, start_epoch: 1.7e9 + r.random_range(0..1000) as f64, channels, dr_refs: vec![] }
}

/// Wire records of one track: start, samples channel by channel in time order, end.
pub fn stream_records(t: &Track) -> Vec<StreamRecord> {
    let mut out = vec![StreamRecord::TrackStart {
        track_id: t.track_id.clone(),
        spacecraft: t.key.spacecraft.clone(),
        antenna: t.key.antenna.clone(),
        comm_type: t.key.comm_type.clone(),
        start_epoch: Some(t.start_epoch),
        dr_refs: t.dr_refs.clone(),
    }];
    for c in &t.channels {
        for (time, v) in c.times.iter().zip(&c.values) {
            out.push(StreamRecord::Sample {
                track_id: t.track_id.clone(),
                channel: c.channel_name.clone(),
                t: t.start_epoch + time,
                v: *v,
            });
        }
    }
    out.push(StreamRecord::TrackEnd { track_id: t.track_id.clone() });
    out
}

/// Random merge of several record sequences, each kept in order.
pub fn interleave(r: &mut ChaCha8Rng, seqs: &[Vec<StreamRecord>]) -> Vec<StreamRecord> {
    let mut tags: Vec<usize> = seqs.iter().enumerate().flat_map(|(i, s)| std::iter::repeat_n(i, s.len())).collect();
    tags.shuffle(r);
    let mut pos = vec![0; seqs.len()];
    tags.into_iter()
        .map(|i| {
            pos[i] += 1;
            seqs[i][pos[i] - 1].clone()
        })
        .collect()
}
