//! Content-addressed vector store and its binary file form.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CMPS" | version u16 = 1 | dim u32 | count u64 | count × ([u8; 32] key, dim × f32)
//! ```
//!
//! Records are sorted by key. A non-empty provenance label is appended after the
//! last record as `u32 length | UTF-8 bytes`; readers accept files without it.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::{content_key, EmbeddingError, Vector};

pub const MAGIC: &[u8; 4] = b"CMPS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 8;

pub type Key = [u8; 32];

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: BTreeMap<Key, Vector>,
    pub provenance: String,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::Format("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            entries: BTreeMap::new(),
            provenance: String::new(),
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert a vector under the content key of `text`. Re-inserting the same
    /// normalized text with an identical vector is a no-op.
    pub fn insert_text(&mut self, text: &str, vector: Vector) -> Result<(), EmbeddingError> {
        self.insert_key(content_key(text), vector)
    }

    pub fn insert_key(&mut self, key: Key, vector: Vector) -> Result<(), EmbeddingError> {
        if vector.dim() != self.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: self.dim,
                found: vector.dim(),
            });
        }
        if vector.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        if let Some(existing) = self.entries.get(&key) {
            if *existing != vector {
                return Err(EmbeddingError::ConflictingEntry(hex::encode(key)));
            }
            return Ok(());
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn get_key(&self, key: &Key) -> Option<&Vector> {
        self.entries.get(key)
    }

    pub fn get(&self, text: &str) -> Option<&Vector> {
        self.entries.get(&content_key(text))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Vector)> {
        self.entries.iter()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), EmbeddingError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(32 + 4 * self.dim);
        for (key, v) in &self.entries {
            buf.clear();
            buf.extend_from_slice(key);
            for x in v.as_slice() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        if !self.provenance.is_empty() {
            w.write_all(&(self.provenance.len() as u32).to_le_bytes())?;
            w.write_all(self.provenance.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        if bytes.len() < HEADER_LEN {
            return Err(EmbeddingError::Format("truncated header".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(EmbeddingError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(EmbeddingError::Format(format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
        if dim == 0 {
            return Err(EmbeddingError::Format("dimension must be positive".into()));
        }
        let record = 32 + 4 * dim;
        let body = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(record))
            .filter(|&b| HEADER_LEN + b <= bytes.len())
            .ok_or_else(|| EmbeddingError::Format(format!("truncated: {count} records declared")))?;
        let mut store = EmbeddingStore::new(dim)?;
        let mut prev: Option<Key> = None;
        for chunk in bytes[HEADER_LEN..HEADER_LEN + body].chunks_exact(record) {
            let key: Key = chunk[..32].try_into().unwrap();
            if prev.is_some_and(|p| p >= key) {
                return Err(EmbeddingError::Format("records not sorted by key".into()));
            }
            prev = Some(key);
            let comps: Vec<f32> = chunk[32..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            store.insert_key(key, Vector::new(comps))?;
        }
        let rest = &bytes[HEADER_LEN + body..];
        if !rest.is_empty() {
            if rest.len() < 4 {
                return Err(EmbeddingError::Format("truncated provenance trailer".into()));
            }
            let n = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
            if rest.len() != 4 + n {
                return Err(EmbeddingError::Format("bad provenance trailer length".into()));
            }
            store.provenance = String::from_utf8(rest[4..].to_vec())
                .map_err(|_| EmbeddingError::Format("provenance is not UTF-8".into()))?;
        }
        Ok(store)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, EmbeddingError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Parse the JSONL debug form: one `{"text": ..., "vector": [...]}` per line.
    pub fn from_jsonl<R: Read>(r: R) -> Result<Self, EmbeddingError> {
        #[derive(Deserialize)]
        struct Line {
            text: String,
            vector: Vec<f32>,
        }
        let mut store: Option<EmbeddingStore> = None;
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Line =
                serde_json::from_str(&line).map_err(|e| EmbeddingError::Format(format!("line {}: {e}", i + 1)))?;
            let s = match &mut store {
                Some(s) => s,
                None => store.insert(EmbeddingStore::new(rec.vector.len())?),
            };
            s.insert_text(&rec.text, Vector::new(rec.vector))?;
        }
        store.ok_or_else(|| EmbeddingError::Format("empty JSONL store".into()))
    }

    /// Load a store, choosing the JSONL form for `.jsonl` files.
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let file = fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "jsonl") {
            Self::from_jsonl(file)
        } else {
            Self::read_from(file)
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
