//! Deterministic hashed bag-of-tokens embedder.
//!
//! This is a non-semantic stand-in for a trained sentence encoder. Every value
//! comes from integer hashing, and float accumulation runs in a fixed order, so
//! vectors are bit-identical across platforms.

use super::{tokenize, EmbeddingError, Vector};

pub const MIN_DIM: usize = 8;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Top 53 bits scaled to `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Embedding of a single token, components in `[-1, 1)`.
pub fn token_vector(token: &str, dim: usize, salt: u64) -> Vec<f32> {
    let mut rng = SplitMix64::new(fnv1a64(token.as_bytes()) ^ salt);
    (0..dim).map(|_| (2.0 * rng.next_unit() - 1.0) as f32).collect()
}

pub fn embed_baseline(text: &str, dim: usize, salt: u64) -> Result<Vector, EmbeddingError> {
    if dim < MIN_DIM {
        return Err(EmbeddingError::BaselineDim(dim));
    }
    let tokens = tokenize(text);
    let mut acc = vec![0f32; dim];
    if tokens.is_empty() {
        return Ok(Vector::new(acc));
    }
    for token in &tokens {
        for (a, v) in acc.iter_mut().zip(token_vector(token, dim, salt)) {
            *a += v;
        }
    }
    let n = tokens.len() as f32;
    for a in acc.iter_mut() {
        *a /= n;
    }
    let mut sq = 0f32;
    for a in &acc {
        sq += a * a;
    }
    let norm = sq.sqrt();
    if norm > 0.0 {
        for a in acc.iter_mut() {
            *a /= norm;
        }
    }
    Ok(Vector::new(acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let a = embed_baseline("I feel fine today", 32, 7).unwrap();
        let b = embed_baseline("I feel fine today", 32, 7).unwrap();
        assert_eq!(a, b);
        let n: f64 = a.as_slice().iter().map(|&x| f64::from(x) * f64::from(x)).sum();
        assert!((n - 1.0).abs() < 1e-5);
        let c = embed_baseline("I feel fine today", 32, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let v = embed_baseline("", 16, 0).unwrap();
        assert_eq!(v.as_slice(), &[0f32; 16]);
        let v = embed_baseline("  ,.; ", 16, 0).unwrap();
        assert_eq!(v.dim(), 16);
        assert!(v.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_small_dim() {
        assert!(matches!(embed_baseline("x", 7, 0), Err(EmbeddingError::BaselineDim(7))));
    }

    #[test]
    fn splitmix_reference_values() {
        // reference stream for seed 1234567
        let mut r = SplitMix64::new(1234567);
        assert_eq!(r.next_u64(), 6457827717110365317);
        assert_eq!(r.next_u64(), 3203168211198807973);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
