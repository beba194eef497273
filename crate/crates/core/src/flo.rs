//! Middlebury `.flo` flow file format.
//!
//! Layout: 4 magic bytes (the little-endian `f32` 202021.25, ASCII "PIEH"),
//! `i32` width, `i32` height, then row-major interleaved `f32` `(u, v)`
//! pairs. Components with magnitude above `1e9` mark unknown flow.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::flow::FlowField;
use crate::{Error, Result};

/// The format's magic number; its little-endian bytes read "PIEH".
pub const FLO_MAGIC: f32 = 202021.25;

/// Components at or above this magnitude denote unknown flow when reading.
pub const UNKNOWN_THRESHOLD: f32 = 1e9;

/// Sentinel written for invalid pixels.
pub const UNKNOWN_FLOW: f32 = 1e10;

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_flo_to(flow, &mut writer).map_err(|e| Error::io(path, e))
}

pub fn write_flo_to(flow: &FlowField, writer: &mut impl Write) -> std::io::Result<()> {
    writer.write_all(&FLO_MAGIC.to_le_bytes())?;
    writer.write_all(&(flow.width() as i32).to_le_bytes())?;
    writer.write_all(&(flow.height() as i32).to_le_bytes())?;
    for p in 0..flow.len() {
        let (u, v) = if flow.valid()[p] {
            (flow.u()[p], flow.v()[p])
        } else {
            (UNKNOWN_FLOW, UNKNOWN_FLOW)
        };
        writer.write_all(&u.to_le_bytes())?;
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    read_flo_bytes(&bytes)
}

pub fn read_flo_bytes(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 {
        return Err(Error::FloTruncated { expected: 12, got: bytes.len() as u64 });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != FLO_MAGIC.to_le_bytes() {
        return Err(Error::FloBadMagic { found: magic });
    }
    if bytes.len() < 12 {
        return Err(Error::FloTruncated { expected: 12, got: bytes.len() as u64 });
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if width < 1 || height < 1 || (width as i64) * (height as i64) > 1 << 30 {
        return Err(Error::FloDimensions { width, height });
    }
    let n = width as usize * height as usize;
    let expected = 12 + n as u64 * 8;
    if (bytes.len() as u64) < expected {
        return Err(Error::FloTruncated { expected, got: bytes.len() as u64 });
    }
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for p in 0..n {
        let base = 12 + p * 8;
        let uf = f32::from_le_bytes(bytes[base..base + 4].try_into().unwrap());
        let vf = f32::from_le_bytes(bytes[base + 4..base + 8].try_into().unwrap());
        valid.push(uf.abs() <= UNKNOWN_THRESHOLD && vf.abs() <= UNKNOWN_THRESHOLD);
        u.push(uf);
        v.push(vf);
    }
    FlowField::new(width as usize, height as usize, u, v, valid)
}
