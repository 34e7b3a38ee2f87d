//! Small dense helpers and power-iteration eigensolver for symmetric PSD operators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(v: &mut [f64], basis: &[EigenPair]) {
    // two passes of classical Gram-Schmidt keep v orthogonal to round-off
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, &b.vector);
            for (x, y) in v.iter_mut().zip(&b.vector) {
                *x -= p * y;
            }
        }
    }
}

impl PowerIteration {
    /// Leading `m` eigenpairs of the symmetric positive semi-definite operator
    /// `apply` (writes `A·x` into its second argument) of dimension `dim`.
    ///
    /// Each pair is found by power iteration restricted to the orthogonal
    /// complement of the pairs already found. Stops early, returning fewer
    /// pairs, when the remaining spectrum is numerically zero.
    pub fn top_eigenpairs<F>(&self, dim: usize, m: usize, mut apply: F) -> Vec<EigenPair>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut found: Vec<EigenPair> = Vec::with_capacity(m);
        let mut scale = 0f64;
        let mut w = vec![0f64; dim];
        for _ in 0..m.min(dim) {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            orthogonalize(&mut v, &found);
            let n = norm(&v);
            if n == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= n);

            let mut iterations = 0;
            let mut degenerate = false;
            while iterations < self.max_iter {
                iterations += 1;
                apply(&v, &mut w);
                orthogonalize(&mut w, &found);
                let wn = norm(&w);
                if wn <= f64::MIN_POSITIVE || (scale > 0.0 && wn <= 1e-12 * scale) {
                    degenerate = true;
                    break;
                }
                let mut delta = 0f64;
                for (x, y) in v.iter_mut().zip(&w) {
                    let nx = y / wn;
                    delta += (nx - *x) * (nx - *x);
                    *x = nx;
                }
                if delta.sqrt() < self.tol {
                    break;
                }
            }
            if degenerate {
                break;
            }
            apply(&v, &mut w);
            orthogonalize(&mut w, &found);
            let value = dot(&v, &w);
            scale = scale.max(value);
            found.push(EigenPair {
                value,
                vector: v,
                iterations,
            });
        }
        found
    }
}

/// Dense row-major square matrix product `A·x`.
pub fn matvec(a: &[f64], dim: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&a[i * dim..(i + 1) * dim], x);
    }
}
