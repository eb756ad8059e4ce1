//! Binary model container: magic bytes, format version, JSON metadata and
//! named sections of little-endian `f64` arrays or raw bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::FeatureSchema;
use crate::types::TYPE_NAMES;

pub const MAGIC: &[u8; 8] = b"SHERLOCK";
pub const FORMAT_VERSION: u32 = 1;

const KIND_FLOATS: u8 = 0;
const KIND_BYTES: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Nn,
    Isolated,
    Tree,
    Forest,
    Dictionary,
    Regex,
    Paragraph,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nn => "nn",
            ModelKind::Isolated => "isolated",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Dictionary => "dictionary",
            ModelKind::Regex => "regex",
            ModelKind::Paragraph => "paragraph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: ModelKind,
    pub schema_hash: String,
    pub types: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
}

impl Metadata {
    pub fn new(kind: ModelKind, seed: u64, hyperparameters: serde_json::Value) -> Self {
        Metadata {
            kind,
            schema_hash: FeatureSchema::canonical().hash(),
            types: TYPE_NAMES.iter().map(|s| s.to_string()).collect(),
            seed,
            hyperparameters,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Floats { shape: Vec<usize>, values: Vec<f64> },
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub metadata: Metadata,
    pub sections: BTreeMap<String, Section>,
}

impl Container {
    pub fn new(metadata: Metadata) -> Self {
        Container {
            metadata,
            sections: BTreeMap::new(),
        }
    }

    pub fn put_floats(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.sections.insert(name.into(), Section::Floats { shape, values });
    }

    pub fn put_bytes(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.sections.insert(name.into(), Section::Bytes(bytes));
    }

    pub fn floats(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.sections.get(name) {
            Some(Section::Floats { shape, values }) => Ok((shape, values)),
            Some(Section::Bytes(_)) => Err(Error::Container(format!("section {name} is not a float array"))),
            None => Err(Error::Container(format!("missing section {name}"))),
        }
    }

    pub fn bytes(&self, name: &str) -> Result<&[u8]> {
        match self.sections.get(name) {
            Some(Section::Bytes(b)) => Ok(b),
            Some(Section::Floats { .. }) => Err(Error::Container(format!("section {name} is not a byte blob"))),
            None => Err(Error::Container(format!("missing section {name}"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let meta = serde_json::to_vec(&self.metadata).expect("metadata serializes");
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, section) in &self.sections {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match section {
                Section::Floats { shape, values } => {
                    out.push(KIND_FLOATS);
                    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
                    for &d in shape {
                        out.extend_from_slice(&(d as u64).to_le_bytes());
                    }
                    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
                    for v in values {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Section::Bytes(bytes) => {
                    out.push(KIND_BYTES);
                    out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
                    out.extend_from_slice(bytes);
                }
            }
        }
        out
    }

    /// Parses a container and checks its version, schema hash and type list
    /// against this build.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Container("not a model container (bad magic bytes)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Container(format!(
                "unsupported container version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let meta_len = r.len()?;
        let metadata: Metadata = serde_json::from_slice(r.take(meta_len)?)?;
        let expected = FeatureSchema::canonical().hash();
        if metadata.schema_hash != expected {
            return Err(Error::SchemaMismatch {
                expected,
                found: metadata.schema_hash,
            });
        }
        if metadata.types.iter().map(String::as_str).ne(TYPE_NAMES.iter().copied()) {
            return Err(Error::Container("container was built for a different type vocabulary".into()));
        }
        let n_sections = r.u32()?;
        let mut sections = BTreeMap::new();
        for _ in 0..n_sections {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Container("section name is not UTF-8".into()))?;
            let section = match r.take(1)?[0] {
                KIND_FLOATS => {
                    let ndims = r.u32()? as usize;
                    let shape = (0..ndims).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
                    let n = r.len()?;
                    if shape.iter().product::<usize>() != n {
                        return Err(Error::Container(format!("section {name} shape disagrees with its length")));
                    }
                    let raw = r.take(n.checked_mul(8).ok_or_else(truncated)?)?;
                    let values = raw
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                        .collect();
                    Section::Floats { shape, values }
                }
                KIND_BYTES => {
                    let n = r.len()?;
                    Section::Bytes(r.take(n)?.to_vec())
                }
                other => return Err(Error::Container(format!("unknown section kind {other}"))),
            };
            sections.insert(name, section);
        }
        if r.pos != bytes.len() {
            return Err(Error::Container("trailing bytes after the last section".into()));
        }
        Ok(Container { metadata, sections })
    }

    pub fn write(&self, mut writer: impl Write) -> Result<()> {
        writer
            .write_all(&self.to_bytes())
            .map_err(|e| Error::io("<container>", e))
    }

    pub fn read(mut reader: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io("<container>", e))?;
        Self::from_bytes(&bytes)
    }

    /// Writes the container and returns its size in bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64> {
        let path = path.as_ref();
        let bytes = self.to_bytes();
        std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(bytes.len() as u64)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn truncated() -> Error {
    Error::Container("container is truncated".into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(truncated)?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| truncated())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let mut c = Container::new(Metadata::new(ModelKind::Tree, 7, serde_json::json!({"max_depth": 3})));
        c.put_floats("a", vec![2, 2], vec![1.0, -0.0, f64::MIN_POSITIVE, 3.5]);
        c.put_bytes("b", b"hello".to_vec());
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        let (shape, values) = back.floats("a").unwrap();
        assert_eq!(shape, &[2, 2]);
        assert_eq!(values[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Container::from_bytes(&bad).is_err());
        let mut version = bytes.clone();
        version[8] = 9;
        assert!(Container::from_bytes(&version).is_err());
    }

    #[test]
    fn schema_hash_checked() {
        let mut c = sample();
        c.metadata.schema_hash = "0".repeat(64);
        let err = Container::from_bytes(&c.to_bytes()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
    }

    #[test]
    fn wrong_section_kind() {
        let c = sample();
        assert!(c.floats("b").is_err());
        assert!(c.bytes("a").is_err());
        assert!(c.bytes("zzz").is_err());
    }

    #[test]
    fn json_floats_survive_a_round_trip() {
        let hard: Vec<f64> = (1..2000).map(|i| (i as f64).ln() * 1.000_000_1 / 7.0).collect();
        let mut c = Container::new(Metadata::new(ModelKind::Tree, 1, serde_json::json!({ "losses": hard })));
        c.put_bytes("losses", serde_json::to_vec(&hard).unwrap());
        let bytes = c.to_bytes();
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let parsed: Vec<f64> = serde_json::from_slice(back.bytes("losses").unwrap()).unwrap();
        assert!(parsed.iter().zip(&hard).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
