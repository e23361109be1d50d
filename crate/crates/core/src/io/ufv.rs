//! `UFV1` patch-feature files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "UFV1"  n:u32  c_in:u32  g_h:u32  g_w:u32  values: n·c_in × f32
//! ```
//!
//! Rows are patches in row-major grid order. Values widen to `f64` on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"UFV1";
const HEADER_LEN: usize = 4 + 4 * 4;

pub fn decode(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, format!("file too short for UFV1 header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(path, "bad magic (expected UFV1)"));
    }
    let field = |i: usize| {
        let at = 4 + 4 * i;
        u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
    };
    let (n, c_in, g_h, g_w) = (field(0), field(1), field(2), field(3));
    if g_h * g_w != n {
        return Err(Error::format(path, format!("grid {g_h}x{g_w} does not match n = {n}")));
    }
    let expected = n
        .checked_mul(c_in)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header sizes overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!("payload length {} does not match n·c_in·4 = {expected}", payload.len()),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    let values = Tensor::from_vec(n, c_in, data)?;
    let features = FeatureMatrix::new(values, (g_h, g_w)).map_err(|e| Error::format(path, e.to_string()))?;
    features
        .check_row_norms()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(features)
}

/// Serializes with values narrowed to `f32`.
pub fn encode(features: &FeatureMatrix) -> Vec<u8> {
    let (g_h, g_w) = features.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * features.n() * features.c_in());
    out.extend_from_slice(MAGIC);
    for v in [features.n(), features.c_in(), g_h, g_w] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &v in features.values().data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(features)).map_err(|e| Error::io(path, e))
}
