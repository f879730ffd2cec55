//! Checkpoint container: named parameter records plus optimizer state.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic            4 bytes  "PCSD"
//! version          u32      currently 1
//! param_count      u32
//! repeated param_count times:
//!   name_len       u16      followed by that many UTF-8 bytes
//!   ndims          u8       followed by ndims × u32 dims
//!   kind           u8       1 = learnable, 0 = statistic
//!   data           prod(dims) × f32
//! adam_present     u8       0 or 1
//! if present:
//!   step           u64
//!   per learnable record, in file order: m then v, prod(dims) × f32 each
//! ```
//!
//! Values are always stored at 32 bits; training runs at the same width, so
//! a save/load round trip reproduces forward passes bit-exactly.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::autodiff::ParamStore;

pub const MAGIC: &[u8; 4] = b"PCSD";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckpointError {
    BadHeader,
    BadVersion(u32),
    Truncated { at: &'static str },
    BadName,
    /// Loaded records do not match the parameters the model expects.
    Mismatch(String),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::BadHeader => write!(f, "bad checkpoint header"),
            CheckpointError::BadVersion(v) => write!(f, "unsupported checkpoint version {v}"),
            CheckpointError::Truncated { at } => write!(f, "checkpoint truncated while reading {at}"),
            CheckpointError::BadName => write!(f, "checkpoint contains a non-UTF-8 record name"),
            CheckpointError::Mismatch(detail) => write!(f, "checkpoint/config mismatch: {detail}"),
        }
    }
}

/// Serializes a store (with its Adam state) into the container format.
pub fn encode(store: &ParamStore<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for e in store.entries() {
        let name = e.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(e.dims.len() as u8);
        for &d in &e.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(e.learnable as u8);
        for &v in &e.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.push(1u8);
    out.extend_from_slice(&store.step.to_le_bytes());
    for e in store.entries() {
        if !e.learnable {
            continue;
        }
        for &v in &e.m {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &e.v {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, at: &'static str) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated { at });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, at: &'static str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, at)?[0])
    }

    fn u16(&mut self, at: &'static str) -> Result<u16, CheckpointError> {
        let b = self.take(2, at)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, at: &'static str) -> Result<u32, CheckpointError> {
        let b = self.take(4, at)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, at: &'static str) -> Result<u64, CheckpointError> {
        let b = self.take(8, at)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn f32s(&mut self, n: usize, at: &'static str) -> Result<Vec<f32>, CheckpointError> {
        let b = self.take(4 * n, at)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Parses a container back into a parameter store.
pub fn decode(bytes: &[u8]) -> Result<ParamStore<f32>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::BadHeader);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let count = r.u32("param count")? as usize;
    let mut store: ParamStore<f32> = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name_bytes = r.take(name_len, "name")?;
        let name = core::str::from_utf8(name_bytes).map_err(|_| CheckpointError::BadName)?;
        let ndims = r.u8("ndims")? as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(r.u32("dims")? as usize);
        }
        let learnable = r.u8("kind")? == 1;
        let len = dims.iter().product();
        let data = r.f32s(len, "values")?;
        store.add(name, &dims, data, learnable);
    }
    if r.u8("adam flag")? == 1 {
        store.step = r.u64("step")?;
        for idx in 0..store.len() {
            if !store.entry(idx).learnable {
                continue;
            }
            let len = store.entry(idx).data.len();
            let m = r.f32s(len, "adam m")?;
            let v = r.f32s(len, "adam v")?;
            let e = store.entry_mut(idx);
            e.m = m;
            e.v = v;
        }
    }
    Ok(store)
}

/// Checks a loaded store against the parameter layout a config produced.
pub fn validate_compatible(
    loaded: &ParamStore<f32>,
    expected: &ParamStore<f32>,
) -> Result<(), CheckpointError> {
    if loaded.len() != expected.len() {
        return Err(CheckpointError::Mismatch(format!(
            "{} records in file, model expects {}",
            loaded.len(),
            expected.len()
        )));
    }
    for idx in 0..expected.len() {
        let (l, e) = (loaded.entry(idx), expected.entry(idx));
        if l.name != e.name {
            return Err(CheckpointError::Mismatch(format!(
                "record {idx} is {}, model expects {}",
                l.name, e.name
            )));
        }
        if l.dims != e.dims {
            return Err(CheckpointError::Mismatch(format!(
                "{} has dims {:?}, model expects {:?}",
                l.name, l.dims, e.dims
            )));
        }
        if l.learnable != e.learnable {
            return Err(CheckpointError::Mismatch(l.name.to_string()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample_store() -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.add("a.w", &[2, 3], vec![1.0, -0.5, 0.25, 2.0, -4.0, 0.125], true);
        s.add("a.bn.mean", &[1, 3], vec![0.0, 0.5, -0.5], false);
        s.add("b.w", &[1, 2], vec![9.0, -9.0], true);
        s.step = 41;
        s.entry_mut(0).m = vec![0.1; 6];
        s.entry_mut(0).v = vec![0.2; 6];
        s.entry_mut(2).m = vec![-0.3; 2];
        s.entry_mut(2).v = vec![0.4; 2];
        s
    }

    #[test]
    fn round_trip_bit_exact() {
        let store = sample_store();
        let bytes = encode(&store);
        let loaded = decode(&bytes).unwrap();
        assert_eq!(loaded.len(), store.len());
        assert_eq!(loaded.step, 41);
        for idx in 0..store.len() {
            let (a, b) = (store.entry(idx), loaded.entry(idx));
            assert_eq!(a.name, b.name);
            assert_eq!(a.dims, b.dims);
            assert_eq!(a.learnable, b.learnable);
            assert_eq!(a.data, b.data);
            assert_eq!(a.m, b.m);
            assert_eq!(a.v, b.v);
        }
    }

    #[test]
    fn corrupt_magic_is_bad_header() {
        let mut bytes = encode(&sample_store());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(CheckpointError::BadHeader)));
    }

    #[test]
    fn truncation_reports_section() {
        let bytes = encode(&sample_store());
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(decode(cut), Err(CheckpointError::Truncated { .. })));
    }

    #[test]
    fn mismatch_detected() {
        let store = sample_store();
        let mut other = ParamStore::new();
        other.add("a.w", &[3, 2], vec![0.0; 6], true);
        other.add("a.bn.mean", &[1, 3], vec![0.0; 3], false);
        other.add("b.w", &[1, 2], vec![0.0; 2], true);
        assert!(matches!(
            validate_compatible(&store, &other),
            Err(CheckpointError::Mismatch(_))
        ));
    }
}
