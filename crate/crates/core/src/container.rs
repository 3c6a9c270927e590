//! Portable binary tensor container shared by every file interface.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "TFC1" (4 bytes)
//! u32   array count
//! per array:
//!   u32  name length (bytes)
//!   name UTF-8
//!   u8   dtype code: 1 = f64, 2 = c128
//!   u8   rank
//!   u64 * rank   dims
//!   payload, row-major: f64 per element, c128 as (re, im) f64 pairs
//! u32   CRC32 (IEEE 802.3, poly 0xEDB88320) of all preceding bytes
//! ```
//!
//! Names are unique, insertion order is preserved, and readers verify both
//! the declared sizes and the trailing checksum, so a byte-identical file is
//! the only file a given container writes.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::fs;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"TFC1";
const DTYPE_F64: u8 = 1;
const DTYPE_C128: u8 = 2;

/// One named array: real (`F64`) or complex (`C128`), row-major.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F64 { dims: Vec<usize>, data: Vec<f64> },
    C128 { dims: Vec<usize>, data: Vec<Complex64> },
}

impl TensorData {
    pub fn dims(&self) -> &[usize] {
        match self {
            TensorData::F64 { dims, .. } | TensorData::C128 { dims, .. } => dims,
        }
    }

    fn element_count(dims: &[usize]) -> usize {
        dims.iter().product()
    }
}

/// An ordered set of uniquely named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    entries: Vec<(String, TensorData)>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Inserts an array. Names must be unique and dims must match the payload.
    pub fn insert(&mut self, name: &str, data: TensorData) -> Result<()> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::InvalidInput(format!("duplicate array name '{name}'")));
        }
        let (dims, len) = match &data {
            TensorData::F64 { dims, data } => (dims, data.len()),
            TensorData::C128 { dims, data } => (dims, data.len()),
        };
        if TensorData::element_count(dims) != len {
            return Err(Error::InvalidShape(format!(
                "array '{name}': dims {:?} declare {} elements, payload has {}",
                dims,
                TensorData::element_count(dims),
                len
            )));
        }
        self.entries.push((name.to_string(), data));
        Ok(())
    }

    pub fn insert_f64(&mut self, name: &str, dims: Vec<usize>, data: Vec<f64>) -> Result<()> {
        self.insert(name, TensorData::F64 { dims, data })
    }

    pub fn insert_c128(&mut self, name: &str, dims: Vec<usize>, data: Vec<Complex64>) -> Result<()> {
        self.insert(name, TensorData::C128 { dims, data })
    }

    pub fn get(&self, name: &str) -> Option<&TensorData> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    /// Fetches a real array, failing with the missing name.
    pub fn require_f64(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.get(name) {
            Some(TensorData::F64 { dims, data }) => Ok((dims, data)),
            Some(_) => Err(Error::InvalidInput(format!("array '{name}' is not f64"))),
            None => Err(Error::InvalidInput(format!("missing array '{name}'"))),
        }
    }

    /// Fetches a complex array, failing with the missing name.
    pub fn require_c128(&self, name: &str) -> Result<(&[usize], &[Complex64])> {
        match self.get(name) {
            Some(TensorData::C128 { dims, data }) => Ok((dims, data)),
            Some(_) => Err(Error::InvalidInput(format!("array '{name}' is not c128"))),
            None => Err(Error::InvalidInput(format!("missing array '{name}'"))),
        }
    }

    /// Serializes to the on-disk byte layout, checksum included.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, data) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match data {
                TensorData::F64 { dims, data } => {
                    out.push(DTYPE_F64);
                    out.push(dims.len() as u8);
                    for d in dims {
                        out.extend_from_slice(&(*d as u64).to_le_bytes());
                    }
                    for x in data {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                TensorData::C128 { dims, data } => {
                    out.push(DTYPE_C128);
                    out.push(dims.len() as u8);
                    for d in dims {
                        out.extend_from_slice(&(*d as u64).to_le_bytes());
                    }
                    for z in data {
                        out.extend_from_slice(&z.re.to_le_bytes());
                        out.extend_from_slice(&z.im.to_le_bytes());
                    }
                }
            }
        }
        let crc = crc32(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Corrupt("container shorter than header".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Corrupt("bad magic, expected TFC1".into()));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let computed = crc32(body);
        if stored != computed {
            return Err(Error::Corrupt(format!(
                "CRC mismatch: stored {stored:#010x}, computed {computed:#010x}"
            )));
        }

        let mut cur = Cursor { buf: body, pos: 4 };
        let count = cur.u32()? as usize;
        let mut container = TensorContainer::new();
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name_bytes = cur.take(name_len)?;
            let name = std::str::from_utf8(name_bytes)
                .map_err(|_| Error::Corrupt("array name is not UTF-8".into()))?
                .to_string();
            let dtype = cur.u8()?;
            let rank = cur.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(cur.u64()? as usize);
            }
            let n = TensorData::element_count(&dims);
            let data = match dtype {
                DTYPE_F64 => {
                    let raw = cur.take(n * 8)?;
                    let mut v = Vec::with_capacity(n);
                    for chunk in raw.chunks_exact(8) {
                        v.push(f64::from_le_bytes(chunk.try_into().unwrap()));
                    }
                    TensorData::F64 { dims, data: v }
                }
                DTYPE_C128 => {
                    let raw = cur.take(n * 16)?;
                    let mut v = Vec::with_capacity(n);
                    for chunk in raw.chunks_exact(16) {
                        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
                        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
                        v.push(Complex64::new(re, im));
                    }
                    TensorData::C128 { dims, data: v }
                }
                other => return Err(Error::Corrupt(format!("unknown dtype code {other}"))),
            };
            container.insert(&name, data)?;
        }
        if cur.pos != body.len() {
            return Err(Error::Corrupt("trailing bytes after last array".into()));
        }
        Ok(container)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Corrupt("truncated container".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// CRC32 (IEEE 802.3), bit-reflected, poly 0xEDB88320.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc: u32 = 0xFFFF_FFFF;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}
