//! Text-to-vector mapping and cosine similarity.
//!
//! Two backends are available: a precomputed [`EmbeddingStore`] keyed by the
//! SHA-256 of normalized text, and the deterministic hashed [`baseline`]
//! embedder. The baseline carries no semantics; it exists so the whole pipeline
//! runs without model files.

pub mod baseline;
pub mod store;
mod text;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::embed_baseline;
pub use store::EmbeddingStore;
pub use text::{content_key, normalize_text, tokenize};

#[derive(Error, Debug)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no vector stored for text {text:?} (key {key})")]
    KeyMiss { text: String, key: String },
    #[error("baseline embedder needs dim >= 8, got {0}")]
    BaselineDim(usize),
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("conflicting vectors for key {0}")]
    ConflictingEntry(String),
    #[error("store format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f32>);

impl Vector {
    pub fn new(components: Vec<f32>) -> Self {
        Self(components)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f32>> for Vector {
    fn from(v: Vec<f32>) -> Self {
        Self(v)
    }
}

/// Cosine similarity accumulated in `f64`, in component order.
///
/// Defined as 0 when either vector has zero norm.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64, EmbeddingError> {
    if u.dim() != v.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(cosine_slices(u.as_slice(), v.as_slice()))
}

pub(crate) fn cosine_slices(u: &[f32], v: &[f32]) -> f64 {
    let (mut dot, mut uu, mut vv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return 0.0;
    }
    (dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0)
}

/// What to do when a store lookup misses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    Error,
    Baseline,
}

#[derive(Debug, Clone)]
pub enum BackendKind {
    Store(Arc<EmbeddingStore>),
    Baseline { dim: usize, salt: u64 },
}

#[derive(Debug, Clone)]
pub struct EmbeddingBackend {
    pub kind: BackendKind,
    pub fallback: Fallback,
    /// Salt used by the baseline embedder, including when it serves as fallback.
    pub salt: u64,
}

impl EmbeddingBackend {
    pub fn baseline(dim: usize, salt: u64) -> Result<Self, EmbeddingError> {
        if dim < baseline::MIN_DIM {
            return Err(EmbeddingError::BaselineDim(dim));
        }
        Ok(Self {
            kind: BackendKind::Baseline { dim, salt },
            fallback: Fallback::Error,
            salt,
        })
    }

    pub fn store(store: Arc<EmbeddingStore>, fallback: Fallback) -> Self {
        Self {
            kind: BackendKind::Store(store),
            fallback,
            salt: 0,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            BackendKind::Store(s) => s.dim(),
            BackendKind::Baseline { dim, .. } => *dim,
        }
    }

    pub fn embed(&self, text: &str) -> Result<Vector, EmbeddingError> {
        match &self.kind {
            BackendKind::Baseline { dim, salt } => embed_baseline(text, *dim, *salt),
            BackendKind::Store(store) => lookup(store, text, self.fallback, self.salt),
        }
    }

    /// Stable textual description, used in manifests and cache keys.
    pub fn describe(&self) -> String {
        match &self.kind {
            BackendKind::Baseline { dim, salt } => format!("baseline:dim={dim}:salt={salt}"),
            BackendKind::Store(s) => format!(
                "store:dim={}:count={}:provenance={}:fallback={:?}",
                s.dim(),
                s.len(),
                s.provenance,
                self.fallback
            ),
        }
    }
}

/// Memoizes backend output by content key.
///
/// Purely an optimization: results are identical with or without it.
#[derive(Debug)]
pub struct CachedEmbedder {
    backend: EmbeddingBackend,
    cache: RwLock<HashMap<[u8; 32], Vector>>,
}

impl CachedEmbedder {
    pub fn new(backend: EmbeddingBackend) -> Self {
        Self {
            backend,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn backend(&self) -> &EmbeddingBackend {
        &self.backend
    }

    pub fn dim(&self) -> usize {
        self.backend.dim()
    }

    pub fn embed(&self, text: &str) -> Result<Vector, EmbeddingError> {
        let key = content_key(text);
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = self.backend.embed(text)?;
        self.cache.write().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// Seed the cache with vectors previously produced by the same backend.
    pub fn preload(&self, entries: impl IntoIterator<Item = ([u8; 32], Vector)>) -> Result<(), EmbeddingError> {
        let dim = self.dim();
        let mut cache = self.cache.write().expect("cache lock");
        for (key, v) in entries {
            if v.dim() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            cache.insert(key, v);
        }
        Ok(())
    }

    /// Cached entries sorted by key.
    pub fn snapshot(&self) -> Vec<([u8; 32], Vector)> {
        let mut out: Vec<_> = self
            .cache
            .read()
            .expect("cache lock")
            .iter()
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        out.sort_by_key(|a| a.0);
        out
    }
}

pub fn lookup(store: &EmbeddingStore, text: &str, fallback: Fallback, salt: u64) -> Result<Vector, EmbeddingError> {
    let key = content_key(text);
    match store.get_key(&key) {
        Some(v) if v.dim() != store.dim() => Err(EmbeddingError::DimensionMismatch {
            expected: store.dim(),
            found: v.dim(),
        }),
        Some(v) => Ok(v.clone()),
        None => match fallback {
            Fallback::Error => Err(EmbeddingError::KeyMiss {
                text: text.to_string(),
                key: hex::encode(key),
            }),
            Fallback::Baseline => embed_baseline(text, store.dim(), salt),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f32]) -> Vector {
        Vector::new(x.to_vec())
    }

    #[test]
    fn cosine_examples() {
        let a = v(&[0.3, -1.2, 2.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap();
        assert!((c - 0.974631846).abs() < 1e-6);
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lookup_policies() {
        let mut s = EmbeddingStore::new(8).unwrap();
        let vec = v(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        s.insert_text("abc", vec.clone()).unwrap();
        assert_eq!(lookup(&s, "abc", Fallback::Error, 0).unwrap(), vec);
        assert_eq!(lookup(&s, " abc ", Fallback::Error, 0).unwrap(), vec);
        assert!(matches!(
            lookup(&s, "unseen", Fallback::Error, 0),
            Err(EmbeddingError::KeyMiss { .. })
        ));
        let fb = lookup(&s, "unseen", Fallback::Baseline, 3).unwrap();
        assert_eq!(fb, embed_baseline("unseen", 8, 3).unwrap());

        let backend = EmbeddingBackend::store(Arc::new(s), Fallback::Error);
        assert_eq!(backend.dim(), 8);
        assert!(backend.embed("nope").is_err());
    }

    fn arb_vec() -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-100f32..100.0, 6)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(a in arb_vec(), b in arb_vec()) {
            let (a, b) = (Vector::new(a), Vector::new(b));
            let ab = cosine(&a, &b).unwrap();
            let ba = cosine(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab.abs() <= 1.0 + 1e-6);
        }

        #[test]
        fn cosine_scale_invariant(a in arb_vec(), b in arb_vec(), alpha in 0.01f32..50.0) {
            let scaled = Vector::new(a.iter().map(|x| x * alpha).collect());
            let (a, b) = (Vector::new(a), Vector::new(b));
            prop_assert!((cosine(&scaled, &b).unwrap() - cosine(&a, &b).unwrap()).abs() < 1e-6);
        }
    }
}
