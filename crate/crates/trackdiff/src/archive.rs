//! Binary encoding of compressed tracks.
//!
//! The data file starts with the 4-byte magic `TRKC` and a little-endian
//! `u16` format version, followed by track blocks appended back to back:
//!
//! ```text
//! block   := len:u32  payload[len]  crc:u32        (crc = CRC-32 of payload)
//! payload := str track_id, str spacecraft, str antenna, str comm_type,
//!            f64 start_epoch,
//!            u32 n_dr, str dr_ref * n_dr,
//!            u32 n_channels, channel * n_channels
//! channel := str name, u32 raw_points, f64 fit_rms, f64 max_abs_residual,
//!            u32 n_hinges, (f64 t, f64 v) * n_hinges
//! str     := u32 byte_len, UTF-8 bytes
//! ```
//!
//! All integers and IEEE-754 doubles are little-endian, so a block decodes to
//! the same bits on every platform.

use trackdiff_core::compression::{CompressedChannel, CompressedTrack, Hinge};
use trackdiff_core::TrackKey;

pub const MAGIC: &[u8; 4] = b"TRKC";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 6;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("block truncated")]
    Truncated,
    #[error("checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid UTF-8 in string field")]
    Utf8,
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("bad file header")]
    Header,
}

pub fn header() -> [u8; 6] {
    let mut h = [0u8; 6];
    h[..4].copy_from_slice(MAGIC);
    h[4..].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    h
}

pub fn check_header(bytes: &[u8]) -> Result<(), DecodeError> {
    if bytes.len() < HEADER_LEN as usize || &bytes[..4] != MAGIC {
        return Err(DecodeError::Header);
    }
    if u16::from_le_bytes([bytes[4], bytes[5]]) != FORMAT_VERSION {
        return Err(DecodeError::Header);
    }
    Ok(())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

/// Full block (length prefix, payload, checksum) for one track.
pub fn encode_block(t: &CompressedTrack) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(256));
    w.str(&t.track_id);
    w.str(&t.key.spacecraft);
    w.str(&t.key.antenna);
    w.str(&t.key.comm_type);
    w.f64(t.start_epoch);
    w.u32(t.dr_refs.len() as u32);
    for d in &t.dr_refs {
        w.str(d);
    }
    w.u32(t.channels.len() as u32);
    for c in &t.channels {
        w.str(&c.channel_name);
        w.u32(c.raw_points);
        w.f64(c.fit_rms);
        w.f64(c.max_abs_residual);
        w.u32(c.hinges.len() as u32);
        for h in &c.hinges {
            w.f64(h.t);
            w.f64(h.v);
        }
    }
    let payload = w.0;
    let mut block = Vec::with_capacity(payload.len() + 8);
    block.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    block.extend_from_slice(&payload);
    block.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    block
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(DecodeError::Truncated)?;
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, DecodeError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| DecodeError::Utf8)
    }
    /// Element count, bounded by the bytes left so corrupt counts cannot
    /// trigger huge allocations.
    fn count(&mut self, min_elem: usize) -> Result<usize, DecodeError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_elem) > self.buf.len() - self.pos {
            return Err(DecodeError::Truncated);
        }
        Ok(n)
    }
}

/// Decodes one full block as written by [`encode_block`].
pub fn decode_block(block: &[u8]) -> Result<CompressedTrack, DecodeError> {
    if block.len() < 8 {
        return Err(DecodeError::Truncated);
    }
    let len = u32::from_le_bytes(block[..4].try_into().unwrap()) as usize;
    if block.len() != len + 8 {
        return Err(DecodeError::Truncated);
    }
    let payload = &block[4..4 + len];
    let stored = u32::from_le_bytes(block[4 + len..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(DecodeError::Checksum { stored, computed });
    }
    decode_payload(payload)
}

fn decode_payload(payload: &[u8]) -> Result<CompressedTrack, DecodeError> {
    let mut r = Reader { buf: payload, pos: 0 };
    let track_id = r.str()?;
    let key = TrackKey { spacecraft: r.str()?, antenna: r.str()?, comm_type: r.str()? };
    let start_epoch = r.f64()?;
    let n_dr = r.count(4)?;
    let dr_refs = (0..n_dr).map(|_| r.str()).collect::<Result<_, _>>()?;
    let n_ch = r.count(28)?;
    let mut channels = Vec::with_capacity(n_ch);
    for _ in 0..n_ch {
        let channel_name = r.str()?;
        let raw_points = r.u32()?;
        let fit_rms = r.f64()?;
        let max_abs_residual = r.f64()?;
        let n_h = r.count(16)?;
        let hinges = (0..n_h).map(|_| Ok(Hinge { t: r.f64()?, v: r.f64()? })).collect::<Result<_, _>>()?;
        channels.push(CompressedChannel { channel_name, hinges, raw_points, fit_rms, max_abs_residual });
    }
    if r.pos != payload.len() {
        return Err(DecodeError::Trailing(payload.len() - r.pos));
    }
    Ok(CompressedTrack { track_id, key, start_epoch, dr_refs, channels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CompressedTrack {
        CompressedTrack {
            track_id: "t-1".into(),
            key: TrackKey::new("VGR1", "DSS-43", "downlink"),
            start_epoch: 1.6e9,
            dr_refs: vec!["DR-9".into()],
            channels: vec![CompressedChannel {
                channel_name: "carrier_power".into(),
                hinges: vec![Hinge { t: 0.0, v: -150.25 }, Hinge { t: 99.0, v: f64::MIN_POSITIVE }],
                raw_points: 100,
                fit_rms: 0.5,
                max_abs_residual: 1.25,
            }],
        }
    }

    #[test]
    fn roundtrip() {
        let b = encode_block(&sample());
        assert_eq!(decode_block(&b).unwrap(), sample());
    }

    #[test]
    fn every_single_byte_flip_is_detected() {
        let b = encode_block(&sample());
        for i in 0..b.len() {
            let mut c = b.clone();
            c[i] ^= 0x40;
            assert!(decode_block(&c).is_err(), "flip at {i} undetected");
        }
    }

    #[test]
    fn header_check() {
        assert!(check_header(&header()).is_ok());
        assert_eq!(check_header(b"TRKX\x01\x00"), Err(DecodeError::Header));
        assert_eq!(check_header(b"TRKC\x02\x00"), Err(DecodeError::Header));
    }
}
