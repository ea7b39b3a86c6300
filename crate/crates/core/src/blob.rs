//! Columnar binary container: `b"JFLOWBLB"`, format version (u32 LE),
//! header length (u32 LE), a JSON header, then the named f64 arrays in
//! header order as little-endian bytes.
//!
//! Header: `{"kind": ..., "arrays": [{"name": ..., "len": ...}, ...], "meta": {...}}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Lattice, Provenance};
use crate::samplers::{JumpPath, PathMeta};

pub const MAGIC: &[u8; 8] = b"JFLOWBLB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Blob {
    pub kind: String,
    pub meta: Value,
    pub arrays: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    arrays: Vec<ArrayEntry>,
    meta: Value,
}

impl Blob {
    pub fn new(kind: impl Into<String>, meta: Value) -> Self {
        Self {
            kind: kind.into(),
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn with_array(mut self, name: &str, data: Vec<f64>) -> Self {
        self.arrays.push((name.to_string(), data));
        self
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Format(format!("missing array {name}")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: self.kind.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(name, v)| ArrayEntry {
                    name: name.clone(),
                    len: v.len(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let payload: usize = self.arrays.iter().map(|(_, v)| v.len() * 8).sum();
        let mut out = Vec::with_capacity(16 + json.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, v) in &self.arrays {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a blob (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported blob version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let hend = 16 + hlen;
        if bytes.len() < hend {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&bytes[16..hend])?;
        let mut pos = hend;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for entry in header.arrays {
            let end = pos + entry.len * 8;
            if bytes.len() < end {
                return Err(bad("truncated array data"));
            }
            let data = bytes[pos..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((entry.name, data));
            pos = end;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after arrays"));
        }
        Ok(Self {
            kind: header.kind,
            meta: header.meta,
            arrays,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct PathHeader {
    dimension: usize,
    horizon: f64,
    meta: PathMeta,
}

impl JumpPath {
    /// Arrays: `grid`, `increments`, `small_increments`, `jump_times`, `jump_sizes`.
    pub fn to_blob(&self) -> Result<Blob> {
        let meta = serde_json::to_value(PathHeader {
            dimension: self.dimension,
            horizon: self.horizon,
            meta: self.meta.clone(),
        })?;
        Ok(Blob::new("jump_path", meta)
            .with_array("grid", self.grid.clone())
            .with_array("increments", self.increments.clone())
            .with_array("small_increments", self.small_increments.clone())
            .with_array("jump_times", self.jump_times.clone())
            .with_array("jump_sizes", self.jump_sizes.clone()))
    }

    pub fn from_blob(blob: &Blob) -> Result<Self> {
        if blob.kind != "jump_path" {
            return Err(Error::Format(format!("expected jump_path, found {}", blob.kind)));
        }
        let h: PathHeader = serde_json::from_value(blob.meta.clone())?;
        Ok(Self {
            dimension: h.dimension,
            horizon: h.horizon,
            grid: blob.array("grid")?.to_vec(),
            increments: blob.array("increments")?.to_vec(),
            small_increments: blob.array("small_increments")?.to_vec(),
            jump_times: blob.array("jump_times")?.to_vec(),
            jump_sizes: blob.array("jump_sizes")?.to_vec(),
            meta: h.meta,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    lattice: Lattice,
    components: usize,
    provenance: Provenance,
}

impl GridFunction {
    /// Single array `values`, node-major.
    pub fn to_blob(&self) -> Result<Blob> {
        let meta = serde_json::to_value(GridHeader {
            lattice: self.lattice,
            components: self.components,
            provenance: self.provenance.clone(),
        })?;
        Ok(Blob::new("grid_function", meta).with_array("values", self.values.clone()))
    }

    pub fn from_blob(blob: &Blob) -> Result<Self> {
        if blob.kind != "grid_function" {
            return Err(Error::Format(format!("expected grid_function, found {}", blob.kind)));
        }
        let h: GridHeader = serde_json::from_value(blob.meta.clone())?;
        GridFunction::new(h.lattice, h.components, blob.array("values")?.to_vec(), h.provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_byte_exact() {
        let b = Blob::new("t", serde_json::json!({})).with_array("a", vec![1.0, -2.5]);
        let bytes = b.to_bytes().unwrap();
        let header = br#"{"kind":"t","arrays":[{"name":"a","len":2}],"meta":{}}"#;
        let mut expected = Vec::new();
        expected.extend_from_slice(b"JFLOWBLB");
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&(header.len() as u32).to_le_bytes());
        expected.extend_from_slice(header);
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&(-2.5f64).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(Blob::from_bytes(&bytes).unwrap(), b);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(Blob::from_bytes(b"nope").is_err());
        let mut bytes = Blob::new("t", serde_json::json!({})).with_array("a", vec![1.0]).to_bytes().unwrap();
        bytes.pop();
        assert!(Blob::from_bytes(&bytes).is_err());
    }
}
