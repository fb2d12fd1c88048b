//! Flat binary container mapping parameter names to tensors.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "TSTFCKPT"
//! version    u32       1
//! count      u32       number of entries
//! entry * count:
//!   name_len u32       byte length of the UTF-8 name
//!   name     name_len bytes
//!   ndim     u32
//!   dims     u64 * ndim
//!   payload  f64 * prod(dims), little-endian IEEE-754
//! ```
//!
//! Entries appear in insertion order; there is no padding and no trailer.

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"TSTFCKPT";
pub const VERSION: u32 = 1;

/// Ordered name → tensor map.
pub type TensorMap<S> = IndexMap<String, Tensor<S>>;

pub fn encode<S: Scalar>(entries: &TensorMap<S>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode<S: Scalar>(bytes: &[u8]) -> Result<TensorMap<S>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()?;
    let mut out = IndexMap::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::Format(format!("entry name: {e}")))?
            .to_string();
        let ndim = r.u32()? as usize;
        let dims = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let payload = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("entry too large".into()))?)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| S::of(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        if out.insert(name.clone(), Tensor::new(&dims, data)?).is_some() {
            return Err(Error::Format(format!("duplicate entry {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last entry".into()));
    }
    Ok(out)
}

pub fn save<S: Scalar>(path: &Path, entries: &TensorMap<S>) -> Result<()> {
    std::fs::write(path, encode(entries)).map_err(|e| Error::io(path, e))
}

pub fn load<S: Scalar>(path: &Path) -> Result<TensorMap<S>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
