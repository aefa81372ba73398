//! `SCAT` container.
//!
//! ```text
//! "SCAT" | version u16 | n_traces u32 | n_samples u32
//!        | n_traces * n_samples f32 (row-major)
//!        | JSON trailer | trailer length u32
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SchemeTag, TraceSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SCAT";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

#[derive(Serialize, Deserialize)]
struct Trailer {
    scheme: String,
    plaintexts: String,
    keys: String,
    masks: Option<String>,
    seed: Option<u64>,
}

pub fn write_traceset<W: Write>(ts: &TraceSet, mut w: W) -> Result<()> {
    let n_traces = u32::try_from(ts.n_traces())
        .map_err(|_| Error::Argument("too many traces for the container".into()))?;
    let n_samples = u32::try_from(ts.n_samples())
        .map_err(|_| Error::Argument("too many samples for the container".into()))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + ts.samples().len() * 4 + 256);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&n_traces.to_le_bytes());
    buf.extend_from_slice(&n_samples.to_le_bytes());
    for x in ts.samples() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let trailer = Trailer {
        scheme: ts.scheme().as_str().to_owned(),
        plaintexts: hex::encode(ts.plaintexts()),
        keys: hex::encode(ts.keys()),
        masks: ts.masks().map(hex::encode),
        seed: ts.seed(),
    };
    let json = serde_json::to_vec(&trailer)?;
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    w.write_all(&buf)?;
    Ok(())
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

pub fn read_traceset(bytes: &[u8]) -> Result<TraceSet> {
    if bytes.len() < HEADER_LEN + 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing SCAT magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let n_traces = u32_at(bytes, 6);
    let n_samples = u32_at(bytes, 10);
    let trailer_len = u32_at(bytes, bytes.len() - 4);
    let body_end = bytes
        .len()
        .checked_sub(4 + trailer_len)
        .filter(|&end| end >= HEADER_LEN)
        .ok_or_else(|| Error::Format("trailer length exceeds file size".into()))?;
    let payload = &bytes[HEADER_LEN..body_end];
    let expected = n_traces
        .checked_mul(n_samples)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Integrity("header dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::Integrity(format!(
            "header declares {n_traces} x {n_samples} samples ({expected} bytes) but payload holds {} bytes",
            payload.len()
        )));
    }
    let trailer: Trailer = serde_json::from_slice(&bytes[body_end..bytes.len() - 4])
        .map_err(|e| Error::Format(format!("bad trailer: {e}")))?;
    let scheme = SchemeTag::parse(&trailer.scheme)
        .ok_or_else(|| Error::Format(format!("unknown scheme {:?}", trailer.scheme)))?;
    let decode = |name: &str, s: &str| {
        hex::decode(s).map_err(|e| Error::Format(format!("bad {name} hex: {e}")))
    };
    let plaintexts = decode("plaintexts", &trailer.plaintexts)?;
    let keys = decode("keys", &trailer.keys)?;
    let masks = trailer.masks.as_deref().map(|m| decode("masks", m)).transpose()?;
    let samples: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if n_traces == 0 || n_samples == 0 {
        return Err(Error::Integrity("empty trace set".into()));
    }
    if plaintexts.len() != n_traces || keys.len() != n_traces {
        return Err(Error::Integrity(format!(
            "header declares {n_traces} traces but metadata holds {} plaintexts and {} keys",
            plaintexts.len(),
            keys.len()
        )));
    }
    Ok(TraceSet::new(samples, n_samples, plaintexts, keys, masks, scheme)?.with_seed(trailer.seed))
}

pub fn save_traceset(ts: &TraceSet, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::new();
    write_traceset(ts, &mut bytes)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_traceset(path: impl AsRef<Path>) -> Result<TraceSet> {
    read_traceset(&fs::read(path)?)
}
