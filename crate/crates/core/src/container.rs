//! Single-file binary container for trained artifacts.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CEIDS" | version: u32 | crc32(payload): u32 | payload length: u64 | payload
//! ```
//!
//! The payload is the bincode encoding of the stored value: fields in
//! declaration order, sequences length-prefixed, reals as raw f64.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"CEIDS";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = MAGIC.len() + 4 + 4 + 8;

pub fn to_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let payload = bincode::serialize(value).map_err(|e| Error::Decode(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn from_bytes<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checksum(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checksum("missing CEIDS magic bytes".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(5);
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let crc = word(9);
    let len = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(Error::Checksum(format!(
            "header declares {len} payload bytes, file has {}",
            payload.len()
        )));
    }
    if crc32fast::hash(payload) != crc {
        return Err(Error::Checksum("payload checksum mismatch".into()));
    }
    bincode::deserialize(payload).map_err(|e| Error::Decode(e.to_string()))
}

pub fn write<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(value)?).map_err(|e| Error::io(path, e))
}

pub fn read<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn save_model(model: &EnsembleModel, path: impl AsRef<Path>) -> Result<()> {
    write(path, model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    read(path)
}
