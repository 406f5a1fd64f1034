//! Flat binary feature cache: four little-endian u32 (magic, channels, bins,
//! frames) followed by f32 values.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::FeatureMap;
use crate::error::{Error, Result};

/// `HKFM` read as a little-endian u32.
pub const CACHE_MAGIC: u32 = u32::from_le_bytes(*b"HKFM");

pub fn write_feature_cache(path: impl AsRef<Path>, map: &FeatureMap) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in [CACHE_MAGIC, map.channels() as u32, map.bins() as u32, map.frames() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in map.values() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_cache(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    if bytes.len() < 16 {
        return Err(bad("truncated header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    if word(0) != CACHE_MAGIC {
        return Err(bad("bad magic"));
    }
    let (c, b, t) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let body = &bytes[16..];
    if body.len() != 4 * c * b * t {
        return Err(bad("payload size does not match header"));
    }
    let values = body
        .chunks_exact(4)
        .map(|ch| f32::from_le_bytes(ch.try_into().expect("4 bytes")) as f64)
        .collect();
    FeatureMap::new(c, b, t, values)
}
