//! Flat binary parameter checkpoints.
//!
//! Layout (little endian): the 8-byte magic `HCGNNCKP`, a `u32` format
//! version, a `u32` tensor count, then per tensor `u64` rows, `u64` cols and
//! `rows * cols` row-major `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::matrix::Matrix;

pub const MAGIC: &[u8; 8] = b"HCGNNCKP";
pub const VERSION: u32 = 1;

fn ck(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &[&Matrix]) -> Result<()> {
    w.write_all(MAGIC).map_err(ck)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(ck)?;
    let count =
        u32::try_from(params.len()).map_err(|_| Error::Checkpoint("too many tensors".into()))?;
    w.write_all(&count.to_le_bytes()).map_err(ck)?;
    for p in params {
        w.write_all(&(p.rows() as u64).to_le_bytes()).map_err(ck)?;
        w.write_all(&(p.cols() as u64).to_le_bytes()).map_err(ck)?;
        for v in p.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(ck)?;
        }
    }
    w.flush().map_err(ck)
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(ck)?;
    Ok(buf)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<Matrix>> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic number".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let cols = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint("tensor size overflows".into()))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        out.push(Matrix::from_vec(rows, cols, data)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(ck)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, params: &[&Matrix]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(f), params)
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<Matrix>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}
