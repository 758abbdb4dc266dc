//! On-disk archive of compressed tracks.
//!
//! A store directory holds `tracks.trkc` (append-only, see [`crate::archive`])
//! and `manifest.json`, which lists every committed track with its block
//! offset. Writes append and fsync the block first, then replace the manifest
//! through a temporary file and a rename, so a crash at any point leaves the
//! previous manifest in force. Bytes past the last manifest entry are never
//! read. Optional raw sidecars live under `raw/`.
//!
//! One writer at a time; readers work from a [`Snapshot`].

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use trackdiff_core::compression::CompressedTrack;
use trackdiff_core::{Track, TrackKey};

use crate::archive::{self, DecodeError};
use crate::error::{Error, Result};

pub const DATA_FILE: &str = "tracks.trkc";
pub const MANIFEST_FILE: &str = "manifest.json";
const RAW_DIR: &str = "raw";
const MANIFEST_VERSION: u32 = 1;

/// Flag set on tracks flushed at stream shutdown without a `track_end`.
pub const FLAG_UNTERMINATED: &str = "unterminated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub track_id: String,
    pub key: TrackKey,
    pub start_epoch: f64,
    pub channels: Vec<String>,
    pub hinge_counts: Vec<usize>,
    pub dr_refs: Vec<String>,
    /// Byte offset of the block in the data file.
    pub offset: u64,
    /// Block length including the length prefix and checksum.
    pub length: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub version: u32,
    pub tracks: Vec<ManifestEntry>,
}

impl StoreManifest {
    fn empty() -> Self {
        Self { version: MANIFEST_VERSION, tracks: Vec::new() }
    }

    /// Ids whose key equals `key`, newest `start_epoch` first (ties by id).
    pub fn query_same_type(&self, key: &TrackKey) -> Vec<String> {
        let mut hits: Vec<&ManifestEntry> = self.tracks.iter().filter(|e| &e.key == key).collect();
        hits.sort_by(|a, b| b.start_epoch.total_cmp(&a.start_epoch).then_with(|| a.track_id.cmp(&b.track_id)));
        hits.into_iter().map(|e| e.track_id.clone()).collect()
    }

    fn check(&self, data_len: u64) -> std::result::Result<(), String> {
        let mut spans: Vec<(u64, u64)> = Vec::with_capacity(self.tracks.len());
        let mut seen = std::collections::HashSet::new();
        for e in &self.tracks {
            if !seen.insert(e.track_id.as_str()) {
                return Err(format!("duplicate id `{}` in manifest", e.track_id));
            }
            if e.offset < archive::HEADER_LEN || e.offset.saturating_add(e.length) > data_len {
                return Err(format!("track `{}` points outside the data file", e.track_id));
            }
            spans.push((e.offset, e.offset + e.length));
        }
        spans.sort_unstable();
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err("overlapping blocks in manifest".into());
        }
        Ok(())
    }
}

pub struct Store {
    dir: PathBuf,
    manifest: StoreManifest,
    index: HashMap<String, usize>,
    keep_raw: bool,
}

fn index_of(m: &StoreManifest) -> HashMap<String, usize> {
    m.tracks.iter().enumerate().map(|(i, e)| (e.track_id.clone(), i)).collect()
}

fn open_err(dir: &Path, reason: impl ToString) -> Error {
    Error::StoreOpen { path: dir.to_path_buf(), reason: reason.to_string() }
}

impl Store {
    /// Opens the store at `dir`, creating an empty one if needed.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| open_err(dir, e))?;
        let data = dir.join(DATA_FILE);
        if !data.exists() {
            let mut f = File::create(&data).map_err(|e| open_err(dir, e))?;
            f.write_all(&archive::header())?;
            f.sync_all()?;
            sync_dir(dir);
        }
        Self::open_existing(dir)
    }

    /// Opens a store that must already exist.
    pub fn open_existing(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let data = dir.join(DATA_FILE);
        let mut head = [0u8; archive::HEADER_LEN as usize];
        let mut f = File::open(&data).map_err(|e| open_err(dir, format!("{}: {e}", data.display())))?;
        f.read_exact(&mut head).map_err(|_| open_err(dir, "data file header truncated"))?;
        archive::check_header(&head).map_err(|e| open_err(dir, e))?;
        let data_len = f.metadata()?.len();
        let manifest = match fs::read(dir.join(MANIFEST_FILE)) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| open_err(dir, format!("manifest: {e}")))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreManifest::empty(),
            Err(e) => return Err(e.into()),
        };
        manifest.check(data_len).map_err(|e| open_err(dir, e))?;
        let index = index_of(&manifest);
        Ok(Self { dir: dir.to_path_buf(), manifest, index, keep_raw: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Enables raw sidecars in [`Store::save_raw`].
    pub fn set_keep_raw(&mut self, keep: bool) {
        self.keep_raw = keep;
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.tracks.is_empty()
    }

    pub fn contains(&self, track_id: &str) -> bool {
        self.index.contains_key(track_id)
    }

    pub fn query_same_type(&self, key: &TrackKey) -> Vec<String> {
        self.manifest.query_same_type(key)
    }

    /// Appends a compressed track and commits it to the manifest.
    pub fn write_compressed(&mut self, t: &CompressedTrack) -> Result<()> {
        self.write_flagged(t, &[])
    }

    pub fn write_flagged(&mut self, t: &CompressedTrack, flags: &[&str]) -> Result<()> {
        self.append(&[(t, flags)])
    }

    /// Appends several tracks with a single sync and manifest swap. Nothing
    /// is committed if any id is already present or repeated.
    pub fn write_batch(&mut self, tracks: &[CompressedTrack]) -> Result<()> {
        let items: Vec<(&CompressedTrack, &[&str])> = tracks.iter().map(|t| (t, &[][..])).collect();
        self.append(&items)
    }

    fn append(&mut self, items: &[(&CompressedTrack, &[&str])]) -> Result<()> {
        let mut fresh = std::collections::HashSet::new();
        for (t, _) in items {
            if self.contains(&t.track_id) || !fresh.insert(t.track_id.as_str()) {
                return Err(Error::DuplicateTrackId(t.track_id.clone()));
            }
        }
        if items.is_empty() {
            return Ok(());
        }
        let mut f = OpenOptions::new().append(true).open(self.dir.join(DATA_FILE))?;
        let mut offset = f.metadata()?.len();
        let mut next = self.manifest.clone();
        let mut buf = Vec::new();
        for (t, flags) in items {
            let block = archive::encode_block(t);
            next.tracks.push(ManifestEntry {
                track_id: t.track_id.clone(),
                key: t.key.clone(),
                start_epoch: t.start_epoch,
                channels: t.channels.iter().map(|c| c.channel_name.clone()).collect(),
                hinge_counts: t.channels.iter().map(|c| c.hinges.len()).collect(),
                dr_refs: t.dr_refs.clone(),
                offset,
                length: block.len() as u64,
                flags: flags.iter().map(|s| s.to_string()).collect(),
            });
            offset += block.len() as u64;
            buf.extend_from_slice(&block);
        }
        f.write_all(&buf)?;
        f.sync_data()?;
        write_manifest(&self.dir, &next)?;
        self.manifest = next;
        self.index = index_of(&self.manifest);
        Ok(())
    }

    /// Writes the raw sidecar for `raw` when raw retention is enabled.
    pub fn save_raw(&self, raw: &Track) -> Result<()> {
        if self.keep_raw {
            write_raw_sidecar(&self.dir, raw)?;
        }
        Ok(())
    }

    pub fn read_compressed(&self, track_id: &str) -> Result<CompressedTrack> {
        let &i = self.index.get(track_id).ok_or_else(|| Error::NotFound(track_id.to_string()))?;
        let e = &self.manifest.tracks[i];
        let mut f = File::open(self.dir.join(DATA_FILE))?;
        f.seek(SeekFrom::Start(e.offset))?;
        let mut buf = vec![0u8; e.length as usize];
        f.read_exact(&mut buf).map_err(|_| corrupt(track_id, DecodeError::Truncated))?;
        decode_entry(e, &buf)
    }

    /// Raw sidecar, if one was kept.
    pub fn read_raw(&self, track_id: &str) -> Result<Option<Track>> {
        if !self.contains(track_id) {
            return Err(Error::NotFound(track_id.to_string()));
        }
        read_raw_sidecar(&self.dir, track_id)
    }

    /// Decodes every committed track into memory.
    pub fn snapshot(&self) -> Result<Snapshot> {
        Snapshot::load(&self.dir)
    }
}

fn corrupt(track_id: &str, e: impl ToString) -> Error {
    Error::CorruptArchive { track_id: track_id.to_string(), reason: e.to_string() }
}

fn decode_entry(e: &ManifestEntry, block: &[u8]) -> Result<CompressedTrack> {
    let t = archive::decode_block(block).map_err(|err| corrupt(&e.track_id, err))?;
    if t.track_id != e.track_id {
        return Err(corrupt(&e.track_id, format!("block holds track `{}`", t.track_id)));
    }
    Ok(t)
}

fn write_manifest(dir: &Path, m: &StoreManifest) -> Result<()> {
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&serde_json::to_vec(m)?)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
    sync_dir(dir);
    Ok(())
}

/// Makes a rename durable where the platform allows syncing directories.
fn sync_dir(dir: &Path) {
    #[cfg(unix)]
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    #[cfg(not(unix))]
    let _ = dir;
}

/// File name for a track id: ASCII alphanumerics, `-`, `_` and `.` are kept,
/// every other byte becomes `%XX`.
fn sidecar_name(track_id: &str) -> String {
    let mut s = String::with_capacity(track_id.len() + 5);
    for b in track_id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || (b == b'.' && !s.is_empty()) {
            s.push(b as char);
        } else {
            s.push_str(&format!("%{b:02X}"));
        }
    }
    s.push_str(".json");
    s
}

fn write_raw_sidecar(dir: &Path, t: &Track) -> Result<()> {
    let raw = dir.join(RAW_DIR);
    fs::create_dir_all(&raw)?;
    let path = raw.join(sidecar_name(&t.track_id));
    let mut f = File::create(&path)?;
    f.write_all(&serde_json::to_vec(t)?)?;
    f.sync_all()?;
    Ok(())
}

fn read_raw_sidecar(dir: &Path, track_id: &str) -> Result<Option<Track>> {
    match fs::read(dir.join(RAW_DIR).join(sidecar_name(track_id))) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Change marker for a store's manifest file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestStamp(Option<(SystemTime, u64)>);

impl ManifestStamp {
    pub fn of(dir: &Path) -> Self {
        let m = fs::metadata(dir.join(MANIFEST_FILE)).ok();
        Self(m.and_then(|m| Some((m.modified().ok()?, m.len()))))
    }
}

/// Immutable, fully decoded view of a store at one manifest version.
#[derive(Debug)]
pub struct Snapshot {
    dir: PathBuf,
    stamp: ManifestStamp,
    manifest: StoreManifest,
    tracks: HashMap<String, CompressedTrack>,
}

impl Snapshot {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        // Stamp first: a write racing the load makes the stamp stale, never the data.
        let stamp = ManifestStamp::of(dir);
        let store = Store::open_existing(dir)?;
        let data = fs::read(dir.join(DATA_FILE))?;
        let mut tracks = HashMap::with_capacity(store.manifest.tracks.len());
        for e in &store.manifest.tracks {
            let block = &data[e.offset as usize..(e.offset + e.length) as usize];
            tracks.insert(e.track_id.clone(), decode_entry(e, block)?);
        }
        Ok(Self { dir: dir.to_path_buf(), stamp, manifest: store.manifest, tracks })
    }

    pub fn stamp(&self) -> &ManifestStamp {
        &self.stamp
    }

    /// True when the manifest on disk no longer matches this snapshot.
    pub fn is_stale(&self) -> bool {
        ManifestStamp::of(&self.dir) != self.stamp
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.manifest.tracks
    }

    pub fn get(&self, track_id: &str) -> Result<&CompressedTrack> {
        self.tracks.get(track_id).ok_or_else(|| Error::NotFound(track_id.to_string()))
    }

    pub fn query_same_type(&self, key: &TrackKey) -> Vec<String> {
        self.manifest.query_same_type(key)
    }

    pub fn read_raw(&self, track_id: &str) -> Result<Option<Track>> {
        self.get(track_id)?;
        read_raw_sidecar(&self.dir, track_id)
    }
}
