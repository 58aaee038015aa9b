//! Versioned binary container: a JSON manifest plus named `f64` blobs.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "ECOLCKPT" | u32 format version | u64 manifest length | manifest JSON
//! u32 blob count | per blob: u32 name length, name, u64 value count, f64 values
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ECOLCKPT";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub manifest: serde_json::Value,
    pub blobs: BTreeMap<String, Vec<f64>>,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec(&self.manifest).expect("json value serializes");
        let mut out = Vec::with_capacity(
            32 + manifest.len() + self.blobs.values().map(|b| 8 * b.len() + 64).sum::<usize>(),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&(self.blobs.len() as u32).to_le_bytes());
        for (name, values) in &self.blobs {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CONTAINER_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported container version {version}"
            )));
        }
        let mlen = r.u64()? as usize;
        let manifest = serde_json::from_slice(r.take(mlen)?)
            .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        let count = r.u32()?;
        let mut blobs = BTreeMap::new();
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec())
                .map_err(|_| Error::Checkpoint("blob name is not utf-8".into()))?;
            let n = r.u64()? as usize;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("blob too large".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blobs.insert(name, values);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Container { manifest, blobs })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn blob(&self, name: &str) -> Result<&[f64]> {
        self.blobs
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Checkpoint(format!("missing blob `{name}`")))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_input_is_an_error() {
        let mut c = Container::default();
        c.blobs.insert("x".into(), vec![1.0, 2.0]);
        let bytes = c.to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert_eq!(Container::from_bytes(&bytes).unwrap(), c);
    }
}
