//! Little-endian binary containers used for all artifacts.
//!
//! Two layouts cover every file the library writes:
//!
//! * matrix container: magic `CEP1`, u32 rows, u32 cols, row-major f32
//!   payload; configuration travels in a JSON sidecar next to the file.
//! * tagged container: 4-byte magic, u32 header length, JSON header,
//!   f32 payload to end of file. Used for hidden states (`HSX1`),
//!   score sequences (`CSQ1`) and model checkpoints (`CKP1`).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Write `bytes` to `path` via a temp file and rename, creating parent
/// directories as needed. Readers never observe a half-written file.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Write a `CEP1` matrix container.
pub fn write_matrix(path: impl AsRef<Path>, rows: usize, cols: usize, data: &[f32]) -> Result<()> {
    let path = path.as_ref();
    if data.len() != rows * cols {
        return Err(Error::Shape(format!(
            "matrix payload has {} values, expected {rows}x{cols}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(12 + 4 * data.len());
    out.extend_from_slice(b"CEP1");
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &out)
}

/// Read a `CEP1` matrix container, returning `(rows, cols, payload)`.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"CEP1" {
        return Err(Error::format(path, "missing CEP1 magic"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[12..];
    if payload.len() != rows * cols * 4 {
        return Err(Error::format(
            path,
            &format!("payload is {} bytes, expected {rows}x{cols} f32", payload.len()),
        ));
    }
    Ok((rows, cols, read_f32s(payload)))
}

/// Write a tagged container: magic, u32 header length, JSON header, f32 payload.
pub fn write_tagged(
    path: impl AsRef<Path>,
    magic: &[u8; 4],
    header: &serde_json::Value,
    payload: &[f32],
) -> Result<()> {
    let header_bytes = serde_json::to_vec(header)
        .map_err(|e| Error::InvalidConfig(format!("unserializable header: {e}")))?;
    let mut out = Vec::with_capacity(8 + header_bytes.len() + 4 * payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for &v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &out)
}

/// Read a tagged container, checking the magic.
pub fn read_tagged(path: impl AsRef<Path>, magic: &[u8; 4]) -> Result<(serde_json::Value, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[0..4] != magic {
        let want = String::from_utf8_lossy(magic).into_owned();
        return Err(Error::format(path, &format!("missing {want} magic")));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if 8 + header_len > bytes.len() {
        return Err(Error::format(path, "header extends past end of file"));
    }
    let header: serde_json::Value = serde_json::from_slice(&bytes[8..8 + header_len])
        .map_err(|e| Error::format(path, &format!("bad JSON header: {e}")))?;
    let payload = &bytes[8 + header_len..];
    if payload.len() % 4 != 0 {
        return Err(Error::format(path, "payload not a whole number of f32"));
    }
    Ok((header, read_f32s(payload)))
}

fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

/// Write a JSON value, pretty-printed, atomically.
pub fn write_json(path: impl AsRef<Path>, value: &serde_json::Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("unserializable value: {e}")))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Read and parse a JSON file.
pub fn read_json(path: impl AsRef<Path>) -> Result<serde_json::Value> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, &format!("bad JSON: {e}")))
}
