//! TF-IDF / truncated-SVD topic learner.
//!
//! Each turn is a document. The document-term matrix uses raw counts weighted
//! by the smoothed IDF `ln((1+N)/(1+df)) + 1`, rows L2-normalized. Topics are
//! the leading right singular vectors, found by power iteration on `AᵀA`;
//! each topic's word weights are the absolute loadings renormalized to sum 1.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::Session;
use crate::embedding::tokenize;
use crate::linalg::PowerIteration;

use super::{TopicError, TopicModel, DEFAULT_TOPICS};

#[derive(Debug, Clone, Copy)]
pub struct BaselineTopicConfig {
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BaselineTopicConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOPICS,
            seed: 0x5eed,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Sparse TF-IDF rows over a sorted vocabulary.
#[derive(Debug, Clone)]
pub struct TfIdf {
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl TfIdf {
    pub fn fit(documents: &[Vec<String>]) -> Self {
        let vocab: BTreeSet<&str> = documents.iter().flatten().map(String::as_str).collect();
        let vocabulary: Vec<String> = vocab.iter().map(|s| s.to_string()).collect();
        let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let n = documents.len() as f64;
        let mut df = vec![0usize; vocabulary.len()];
        let mut counts: Vec<BTreeMap<usize, usize>> = Vec::with_capacity(documents.len());
        for doc in documents {
            let mut c = BTreeMap::new();
            for w in doc {
                *c.entry(index[w.as_str()]).or_insert(0) += 1;
            }
            for &w in c.keys() {
                df[w] += 1;
            }
            counts.push(c);
        }
        let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        let rows = counts
            .into_iter()
            .map(|c| {
                let mut row: Vec<(usize, f64)> = c.into_iter().map(|(w, tf)| (w, tf as f64 * idf[w])).collect();
                let norm = row.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|(_, x)| *x /= norm);
                }
                row
            })
            .collect();
        Self { vocabulary, idf, rows }
    }

    /// `out = AᵀA·x`.
    pub fn gram_apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for row in &self.rows {
            let ax: f64 = row.iter().map(|&(j, v)| v * x[j]).sum();
            for &(j, v) in row {
                out[j] += v * ax;
            }
        }
    }
}

pub fn learn_baseline_topics(corpus: &[Session], config: &BaselineTopicConfig) -> Result<TopicModel, TopicError> {
    let documents: Vec<Vec<String>> = corpus
        .iter()
        .flat_map(|s| s.turns.iter().map(|t| tokenize(&t.text)))
        .filter(|d| !d.is_empty())
        .collect();
    if config.k < 2 {
        return Err(TopicError::InvalidModel(format!("K = {} (need >= 2)", config.k)));
    }
    if documents.len() < config.k {
        return Err(TopicError::DegenerateCorpus(format!(
            "{} non-empty documents for K = {}",
            documents.len(),
            config.k
        )));
    }
    let tfidf = TfIdf::fit(&documents);
    let v = tfidf.vocabulary.len();
    if v < config.k {
        return Err(TopicError::DegenerateCorpus(format!(
            "vocabulary of {v} words for K = {}",
            config.k
        )));
    }
    let solver = PowerIteration {
        tol: config.tol,
        max_iter: config.max_iter,
        seed: config.seed,
    };
    let pairs = solver.top_eigenpairs(v, config.k, |x, o| tfidf.gram_apply(x, o));
    if pairs.len() < config.k {
        return Err(TopicError::DegenerateCorpus(format!(
            "TF-IDF matrix has rank {} < K = {}",
            pairs.len(),
            config.k
        )));
    }
    let topic_word = pairs
        .iter()
        .map(|p| {
            let total: f64 = p.vector.iter().map(|x| x.abs()).sum();
            p.vector.iter().map(|x| x.abs() / total).collect()
        })
        .collect();
    TopicModel::new(
        tfidf.vocabulary,
        topic_word,
        format!("baseline-tfidf-svd:k={}:seed={}", config.k, config.seed),
    )
}
