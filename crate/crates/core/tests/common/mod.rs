//! Independent reference implementations shared by integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use alliance_core::{default_inventory, CachedEmbedder, EmbeddingBackend, EmbeddingStore, Fallback, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent transcription of the inventory: scale letter and direction per item.
pub const SCALES: &str = "BTGTBGTBGGTGTGTTBTBBBGBTGBGBBGTGTGTB";
pub const SIGNS: &str = "-+-+++-+----++-++++-++++++-+-+-+--++";

pub fn sign_of(item: usize) -> f64 {
    if SIGNS.as_bytes()[item] == b'+' {
        1.0
    } else {
        -1.0
    }
}

/// (task, bond, goal) by direct summation over the transcription.
pub fn brute_force_scales(sim: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (j, s) in sim.iter().enumerate() {
        let slot = match SCALES.as_bytes()[j] {
            b'T' => 0,
            b'B' => 1,
            _ => 2,
        };
        out[slot] += sign_of(j) * s;
    }
    out
}

pub fn brute_force_cosine(u: &[f32], v: &[f32]) -> f64 {
    let mut uv = 0.0f64;
    let mut uu = 0.0f64;
    let mut vv = 0.0f64;
    for i in 0..u.len() {
        let (a, b) = (u[i] as f64, v[i] as f64);
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        0.0
    } else {
        uv / (uu.sqrt() * vv.sqrt())
    }
}

pub const WAA_DIM: usize = 48;

/// Store where item j (both wordings) is the unit vector e_j and each of
/// `turns` random texts has a seeded dense vector.
pub fn orthonormal_fixture(turns: usize, seed: u64) -> (Arc<EmbeddingStore>, Vec<(String, Vec<f32>)>) {
    let inv = default_inventory();
    let mut store = EmbeddingStore::new(WAA_DIM).unwrap();
    for (j, item) in inv.items.iter().enumerate() {
        let mut e = vec![0f32; WAA_DIM];
        e[j] = 1.0;
        store.insert_text(&item.client_text, Vector::new(e.clone())).unwrap();
        store.insert_text(&item.therapist_text, Vector::new(e)).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::new();
    for t in 0..turns {
        let text = format!("fixture turn number {t}");
        let v: Vec<f32> = (0..WAA_DIM).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        store.insert_text(&text, Vector::new(v.clone())).unwrap();
        texts.push((text, v));
    }
    (Arc::new(store), texts)
}

pub fn store_embedder(store: Arc<EmbeddingStore>) -> CachedEmbedder {
    CachedEmbedder::new(EmbeddingBackend::store(store, Fallback::Error))
}

/// Student t density.
pub fn t_pdf(t: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (c - (df + 1.0) / 2.0 * (1.0 + t * t / df).ln()).exp()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// CDF by adaptive Simpson integration of the density from 0 to t.
pub fn t_cdf_by_integration(t: f64, df: f64) -> f64 {
    let f = |x: f64| t_pdf(x, df);
    let (a, b) = (0.0, t.abs());
    if b == 0.0 {
        return 0.5;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * b), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let half_mass = adaptive(&f, a, b, fa, fm, fb, whole, 1e-14, 40);
    if t > 0.0 {
        0.5 + half_mass
    } else {
        0.5 - half_mass
    }
}

/// Twenty (t, df) grid points.
pub fn t_grid() -> Vec<(f64, f64)> {
    let ts = [-3.5, -2.0, -0.7, 0.0, 0.4, 1.3, 2.2, 4.0, -1.1, 2.9];
    let dfs = [1.0, 3.0, 8.0, 25.0];
    (0..20).map(|i| (ts[i % ts.len()], dfs[i % dfs.len()])).collect()
}

/// Bit patterns of the baseline embedder output for fixed inputs
/// (reference values computed outside this crate).
pub const HELLO_WORLD_8_SALT0: [u32; 8] = [
    0x3f54a0d8, 0x3df23ab4, 0xbcd211d7, 0xbc9bc397, 0x3e7ca668, 0xbe055432, 0x3ea76222, 0x3eaa2375,
];
pub const I_FEEL_FINE_8_SALT42: [u32; 8] = [
    0xbd80e510, 0xbe747bfb, 0x3f07b8f8, 0x3e5de4d8, 0x3d89f365, 0xbf317328, 0x3eb57756, 0x3c9e2b61,
];

/// Token vector straight from the hash/PRNG recipe.
pub fn oracle_token_vector(token: &str, dim: usize, salt: u64) -> Vec<f32> {
    let mut h: u64 = 14695981039346656037;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(1099511628211);
    }
    let mut state = h ^ salt;
    let mut out = Vec::with_capacity(dim);
    for _ in 0..dim {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        let u = (z >> 11) as f64 / 9007199254740992.0;
        out.push((u * 2.0 - 1.0) as f32);
    }
    out
}

/// Worked-example store, relative to the core crate root.
pub const WORKED_EXAMPLE_FIXTURE: &str = "tests/fixtures/worked_example_store.jsonl";

pub const SENTENCES: [&str; 3] = [
    "I feel really understood and supported by you. It's comforting to know I can talk about anything here without being judged.",
    "I understand that practicing these relaxation techniques as daily tasks will help me manage my anxiety better.",
    "I'm committed to working towards better communication with my partner, as we discussed in our last session.",
];

/// (bond, task, goal) per sentence.
pub const TARGETS: [[f64; 3]; 3] = [[1.41, -0.76, -0.66], [-1.39, 0.46, 0.93], [-0.85, -0.56, 1.40]];
