//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "FRDL" | version u32 | tensor count u32
//! per tensor: name length u32 | name (UTF-8) | rank u32 | dims u32 * rank | f32 * len
//! ```
//!
//! Values are stored as `f32`; parameters are kept `f32`-representable so a
//! round trip is exact.

use std::fs;
use std::path::Path;

use super::params::NetworkParams;
use super::tensor::Tensor;
use crate::error::{CheckpointError, Error, Result};

pub const MAGIC: [u8; 4] = *b"FRDL";
pub const VERSION: u32 = 1;

const MAX_RANK: usize = 8;

pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Vec<u8> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated(format!(
                "{what} needs {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_tensors(buf: &[u8]) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let mut r = Reader { buf, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let count = r.u32("tensor count")? as usize;
    let mut out = Vec::new();
    for i in 0..count {
        let n = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(n, "name")?)
            .map_err(|_| CheckpointError::Malformed(format!("tensor {i}: name is not UTF-8")))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        if rank > MAX_RANK {
            return Err(CheckpointError::Malformed(format!("tensor {name}: rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dims")? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| CheckpointError::Malformed(format!("tensor {name}: shape {shape:?} overflows")))?;
        let data = r
            .take(len, &format!("data of {name}"))?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if out.iter().any(|(n, _): &(String, Tensor)| *n == name) {
            return Err(CheckpointError::Malformed(format!("duplicate tensor {name}")));
        }
        out.push((name, Tensor::from_vec(&shape, data).expect("length checked")));
    }
    if r.pos != buf.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }
    Ok(out)
}

pub fn write_tensors<'a>(
    path: &Path,
    tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>,
) -> Result<()> {
    fs::write(path, encode_tensors(tensors)).map_err(|e| Error::io(path, e))
}

pub fn read_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_tensors(&buf)?)
}

pub fn save_checkpoint(params: &NetworkParams, path: &Path) -> Result<()> {
    write_tensors(path, params.iter())
}

/// Every tensor in the file, in file order.
pub fn load_checkpoint(path: &Path) -> Result<NetworkParams> {
    Ok(NetworkParams::from_named(read_tensors(path)?))
}
