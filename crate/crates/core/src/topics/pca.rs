//! Principal components of the turn-level topic-score space.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, matvec, PowerIteration};

use super::TopicError;

pub const DEFAULT_COMPONENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalTopics {
    pub mean: Vec<f64>,
    /// m × K, unit-norm, mutually orthogonal rows.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PrincipalTopics {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// PCA over an N×K sample matrix using the (N−1)-normalized covariance.
///
/// Each component is flipped so its largest-magnitude coefficient is positive.
pub fn principal_topics(samples: &[Vec<f64>], m: usize) -> Result<PrincipalTopics, TopicError> {
    let n = samples.len();
    let k = samples.first().map_or(0, Vec::len);
    if n <= k || k == 0 {
        return Err(TopicError::TooFewSamples { samples: n, topics: k });
    }
    if let Some(bad) = samples.iter().find(|r| r.len() != k) {
        return Err(TopicError::DimensionMismatch {
            expected: k,
            found: bad.len(),
        });
    }
    let mut mean = vec![0f64; k];
    for row in samples {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n as f64);

    let mut cov = vec![0f64; k * k];
    for row in samples {
        let c: Vec<f64> = row.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..k {
            for j in i..k {
                cov[i * k + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            let v = cov[i * k + j] / (n - 1) as f64;
            cov[i * k + j] = v;
            cov[j * k + i] = v;
        }
    }

    let pairs = PowerIteration::default().top_eigenpairs(k, m, |x, o| matvec(&cov, k, x, o));
    if pairs.len() < m {
        return Err(TopicError::RankDeficient {
            achieved: pairs.len(),
            requested: m,
        });
    }
    let mut components = Vec::with_capacity(m);
    let mut explained_variance = Vec::with_capacity(m);
    for p in pairs {
        let mut v = p.vector;
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(p.value);
    }
    Ok(PrincipalTopics {
        mean,
        components,
        explained_variance,
    })
}

/// Coordinates of a topic-score vector in principal-topic space.
pub fn project_principal(scores: &[f64], pt: &PrincipalTopics) -> Result<Vec<f64>, TopicError> {
    if scores.len() != pt.dim() {
        return Err(TopicError::DimensionMismatch {
            expected: pt.dim(),
            found: scores.len(),
        });
    }
    let centered: Vec<f64> = scores.iter().zip(&pt.mean).map(|(s, m)| s - m).collect();
    Ok(pt.components.iter().map(|c| dot(c, &centered)).collect())
}
