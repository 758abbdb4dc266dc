//! Batch and streaming ingestion into a [`Store`].
//!
//! # Batch layout
//!
//! A batch directory holds `manifest.json`, an array of
//! `{track_id, spacecraft, antenna, comm_type, start_epoch, dr_refs}`
//! objects, and any number of `*.csv` files with the header
//! `track_id,channel,t,v`. `t` is UTC epoch seconds; rows of one channel
//! must appear in time order. Rows may be spread over several files.
//!
//! # Stream protocol
//!
//! One JSON object per line:
//!
//! ```text
//! {"event":"track_start","track_id":"a","spacecraft":"VGR1","antenna":"DSS-43","comm_type":"downlink"}
//! {"track_id":"a","channel":"carrier_power","t":1700000000.0,"v":-151.2}
//! {"event":"track_end","track_id":"a"}
//! ```
//!
//! Samples may carry `"event":"sample"`. `track_start` optionally carries
//! `start_epoch` (defaults to the first sample's `t`) and `dr_refs`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use trackdiff_core::compression::{compress_track, CompressedTrack};
use trackdiff_core::model::validate_track;
use trackdiff_core::{ChannelSeries, Track, TrackKey};

use crate::error::{Error, Result};
use crate::store::{Store, FLAG_UNTERMINATED};

pub const BATCH_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub track_id: String,
    pub spacecraft: String,
    pub antenna: String,
    pub comm_type: String,
    pub start_epoch: f64,
    #[serde(default)]
    pub dr_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackFailure {
    pub track_id: String,
    pub code: String,
    pub message: String,
}

impl TrackFailure {
    fn new(track_id: &str, e: &Error) -> Self {
        Self { track_id: track_id.to_string(), code: e.code().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub ingested: Vec<String>,
    pub failed: Vec<TrackFailure>,
}

/// Per-channel sample buffer keeping first-appearance channel order.
#[derive(Debug, Default, Clone)]
struct Buffer {
    channels: Vec<(String, Vec<f64>, Vec<f64>)>,
    index: HashMap<String, usize>,
}

impl Buffer {
    fn push(&mut self, channel: &str, t: f64, v: f64) {
        let i = match self.index.get(channel) {
            Some(&i) => i,
            None => {
                self.channels.push((channel.to_string(), Vec::new(), Vec::new()));
                self.index.insert(channel.to_string(), self.channels.len() - 1);
                self.channels.len() - 1
            }
        };
        self.channels[i].1.push(t);
        self.channels[i].2.push(v);
    }

    fn samples(&self) -> usize {
        self.channels.iter().map(|c| c.1.len()).sum()
    }

    fn into_track(self, track_id: &str, key: TrackKey, start_epoch: f64, dr_refs: Vec<String>) -> Track {
        let channels = self
            .channels
            .into_iter()
            .map(|(name, t, v)| ChannelSeries::new(&name, t.into_iter().map(|x| x - start_epoch).collect(), v))
            .collect();
        Track { track_id: track_id.to_string(), key, start_epoch, channels, dr_refs }
    }
}

fn prepare(raw: Track, budget: usize) -> Result<(Track, CompressedTrack)> {
    let raw = validate_track(raw)?;
    let c = compress_track(&raw, budget, 0.0)?;
    Ok((raw, c))
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    track_id: String,
    channel: String,
    t: String,
    v: String,
}

/// Reads, validates, compresses and stores every track of a batch directory.
/// Bad tracks are reported and skipped.
pub fn ingest_batch(dir: impl AsRef<Path>, store: &mut Store, budget: usize) -> Result<BatchReport> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(BATCH_MANIFEST);
    if !manifest_path.is_file() {
        return Err(Error::ManifestMissing(dir.to_path_buf()));
    }
    let entries: Vec<BatchEntry> = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    let mut csvs: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();

    let known: HashMap<&str, usize> = entries.iter().enumerate().map(|(i, e)| (e.track_id.as_str(), i)).collect();
    let mut buffers: Vec<Buffer> = vec![Buffer::default(); entries.len()];
    let mut bad: BTreeMap<String, Error> = BTreeMap::new();
    for path in &csvs {
        let mut rdr = csv::Reader::from_path(path)?;
        for row in rdr.deserialize::<CsvRow>() {
            let row = row?;
            let Some(&i) = known.get(row.track_id.as_str()) else {
                bad.entry(row.track_id.clone())
                    .or_insert_with(|| Error::Invalid(format!("track `{}` is not in the batch manifest", row.track_id)));
                continue;
            };
            match (row.t.trim().parse::<f64>(), row.v.trim().parse::<f64>()) {
                (Ok(t), Ok(v)) => buffers[i].push(&row.channel, t, v),
                _ => {
                    bad.entry(row.track_id.clone()).or_insert_with(|| {
                        Error::Invalid(format!("unparseable sample `{}`,`{}` in {}", row.t, row.v, path.display()))
                    });
                }
            }
        }
    }

    let mut report = BatchReport::default();
    let mut ready = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (e, buf) in entries.iter().zip(buffers) {
        if !seen.insert(e.track_id.as_str()) {
            let err = Error::DuplicateTrackId(e.track_id.clone());
            report.failed.push(TrackFailure::new(&e.track_id, &err));
            continue;
        }
        if let Some(err) = bad.remove(&e.track_id) {
            report.failed.push(TrackFailure::new(&e.track_id, &err));
            continue;
        }
        if store.contains(&e.track_id) {
            report.failed.push(TrackFailure::new(&e.track_id, &Error::DuplicateTrackId(e.track_id.clone())));
            continue;
        }
        let key = TrackKey::new(&e.spacecraft, &e.antenna, &e.comm_type);
        let raw = buf.into_track(&e.track_id, key, e.start_epoch, e.dr_refs.clone());
        match prepare(raw, budget) {
            Ok((raw, c)) => {
                store.save_raw(&raw)?;
                report.ingested.push(c.track_id.clone());
                ready.push(c);
            }
            Err(err) => report.failed.push(TrackFailure::new(&e.track_id, &err)),
        }
    }
    for (id, err) in bad {
        report.failed.push(TrackFailure::new(&id, &err));
    }
    store.write_batch(&ready)?;
    Ok(report)
}

/// Writes tracks in the batch layout (one CSV per track).
pub fn export_batch(dir: impl AsRef<Path>, tracks: &[Track]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let entries: Vec<BatchEntry> = tracks
        .iter()
        .map(|t| BatchEntry {
            track_id: t.track_id.clone(),
            spacecraft: t.key.spacecraft.clone(),
            antenna: t.key.antenna.clone(),
            comm_type: t.key.comm_type.clone(),
            start_epoch: t.start_epoch,
            dr_refs: t.dr_refs.clone(),
        })
        .collect();
    fs::write(dir.join(BATCH_MANIFEST), serde_json::to_vec_pretty(&entries)?)?;
    for (i, t) in tracks.iter().enumerate() {
        let mut w = csv::Writer::from_path(dir.join(format!("{i:05}.csv")))?;
        w.write_record(["track_id", "channel", "t", "v"])?;
        for c in &t.channels {
            for (time, v) in c.times.iter().zip(&c.values) {
                // `{:?}` prints the shortest string that parses back to the same f64.
                w.write_record([&t.track_id, &c.channel_name, &format!("{:?}", t.start_epoch + time), &format!("{v:?}")])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StreamRecord {
    TrackStart {
        track_id: String,
        spacecraft: String,
        antenna: String,
        comm_type: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_epoch: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        dr_refs: Vec<String>,
    },
    Sample {
        track_id: String,
        channel: String,
        t: f64,
        v: f64,
    },
    TrackEnd {
        track_id: String,
    },
}

impl StreamRecord {
    /// Parses one wire line; objects without `event` are samples.
    pub fn parse(line: &str) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(line)?;
        if let Some(obj) = v.as_object_mut() {
            obj.entry("event").or_insert_with(|| "sample".into());
        }
        Ok(serde_json::from_value(v)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub records: u64,
    pub stored: Vec<String>,
    /// Samples outside a start/end bracket, dropped.
    pub orphan_samples: u64,
    pub malformed_lines: u64,
    /// Repeated starts and ends without a start.
    pub protocol_errors: u64,
    pub failed: Vec<TrackFailure>,
    /// Tracks still open at shutdown, stored with the `unterminated` flag.
    pub unterminated: Vec<String>,
}

#[derive(Debug)]
struct OpenTrack {
    key: TrackKey,
    start_epoch: Option<f64>,
    dr_refs: Vec<String>,
    buf: Buffer,
}

/// Stream state: one sample buffer per open track.
#[derive(Debug)]
pub struct StreamIngestor {
    budget: usize,
    open: BTreeMap<String, OpenTrack>,
    stats: StreamStats,
}

impl StreamIngestor {
    pub fn new(budget: usize) -> Self {
        Self { budget, open: BTreeMap::new(), stats: StreamStats::default() }
    }

    pub fn stats(&self) -> &StreamStats {
        &self.stats
    }

    pub fn open_track_ids(&self) -> impl Iterator<Item = &str> {
        self.open.keys().map(String::as_str)
    }

    /// Buffered samples of an open track, as a raw track.
    pub fn open_track(&self, track_id: &str) -> Option<Track> {
        let o = self.open.get(track_id)?;
        let start = o.start_epoch.or_else(|| o.buf.channels.first().and_then(|c| c.1.first().copied()))?;
        Some(o.buf.clone().into_track(track_id, o.key.clone(), start, o.dr_refs.clone()))
    }

    /// Handles one wire line. Only store I/O failures are returned; protocol
    /// problems are counted in [`StreamStats`].
    pub fn handle_line(&mut self, line: &str, store: &mut Store) -> Result<()> {
        if line.trim().is_empty() {
            return Ok(());
        }
        match StreamRecord::parse(line) {
            Ok(r) => self.handle(r, store),
            Err(_) => {
                self.stats.records += 1;
                self.stats.malformed_lines += 1;
                Ok(())
            }
        }
    }

    pub fn handle(&mut self, record: StreamRecord, store: &mut Store) -> Result<()> {
        self.stats.records += 1;
        match record {
            StreamRecord::TrackStart { track_id, spacecraft, antenna, comm_type, start_epoch, dr_refs } => {
                if self.open.contains_key(&track_id) {
                    self.stats.protocol_errors += 1;
                    return Ok(());
                }
                let key = TrackKey::new(&spacecraft, &antenna, &comm_type);
                self.open.insert(track_id, OpenTrack { key, start_epoch, dr_refs, buf: Buffer::default() });
            }
            StreamRecord::Sample { track_id, channel, t, v } => match self.open.get_mut(&track_id) {
                Some(o) => o.buf.push(&channel, t, v),
                None => self.stats.orphan_samples += 1,
            },
            StreamRecord::TrackEnd { track_id } => match self.open.remove(&track_id) {
                Some(o) => self.commit(&track_id, o, &[], store)?,
                None => self.stats.protocol_errors += 1,
            },
        }
        Ok(())
    }

    fn commit(&mut self, track_id: &str, o: OpenTrack, flags: &[&str], store: &mut Store) -> Result<()> {
        let start = o.start_epoch.or_else(|| o.buf.channels.first().and_then(|c| c.1.first().copied())).unwrap_or(0.0);
        let raw = o.buf.into_track(track_id, o.key, start, o.dr_refs);
        let outcome = prepare(raw, self.budget).and_then(|(raw, c)| {
            if store.contains(track_id) {
                return Err(Error::DuplicateTrackId(track_id.to_string()));
            }
            store.save_raw(&raw)?;
            store.write_flagged(&c, flags)
        });
        match outcome {
            Ok(()) => self.stats.stored.push(track_id.to_string()),
            Err(e @ Error::Io(_)) => return Err(e),
            Err(e) => self.stats.failed.push(TrackFailure::new(track_id, &e)),
        }
        Ok(())
    }

    /// Flushes every still-open track with the `unterminated` flag.
    pub fn finish(mut self, store: &mut Store) -> Result<StreamStats> {
        let open = std::mem::take(&mut self.open);
        for (id, o) in open {
            if o.buf.samples() == 0 {
                self.stats.failed.push(TrackFailure {
                    track_id: id.clone(),
                    code: "invalid_track".into(),
                    message: "unterminated track without samples".into(),
                });
                continue;
            }
            self.stats.unterminated.push(id.clone());
            self.commit(&id, o, &[FLAG_UNTERMINATED], store)?;
        }
        Ok(self.stats)
    }
}

/// Feeds every line of `reader` to a fresh ingestor, then flushes.
pub fn ingest_reader(reader: impl BufRead, store: &mut Store, budget: usize) -> Result<StreamStats> {
    let mut ing = StreamIngestor::new(budget);
    for line in reader.lines() {
        ing.handle_line(&line?, store)?;
    }
    ing.finish(store)
}

/// Accepts NDJSON connections on `listener` until `shutdown` resolves. Lines
/// from all connections go through one ingestor, the store's single writer.
pub async fn ingest_tcp(
    listener: tokio::net::TcpListener,
    mut store: Store,
    budget: usize,
    shutdown: impl std::future::Future<Output = ()>,
) -> Result<(Store, StreamStats)> {
    use tokio::io::AsyncBufReadExt;

    let (tx, mut rx) = tokio::sync::mpsc::channel::<String>(4096);
    let writer = tokio::task::spawn_blocking(move || -> Result<(Store, StreamStats)> {
        let mut ing = StreamIngestor::new(budget);
        while let Some(line) = rx.blocking_recv() {
            ing.handle_line(&line, &mut store)?;
        }
        let stats = ing.finish(&mut store)?;
        Ok((store, stats))
    });
    let mut conns = tokio::task::JoinSet::new();
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            accepted = listener.accept() => {
                let (sock, _) = accepted?;
                let tx = tx.clone();
                conns.spawn(async move {
                    let mut lines = tokio::io::BufReader::new(sock).lines();
                    while let Ok(Some(line)) = lines.next_line().await {
                        if tx.send(line).await.is_err() {
                            break;
                        }
                    }
                });
            }
        }
    }
    // Let connected clients drain what they already sent, then cut them off.
    let drain = async { while conns.join_next().await.is_some() {} };
    let _ = tokio::time::timeout(std::time::Duration::from_millis(200), drain).await;
    conns.abort_all();
    drop(tx);
    writer.await.map_err(|e| Error::Invalid(format!("stream writer panicked: {e}")))?
}
