//! Topic-model quality: diversity and document co-occurrence coherence.
//!
//! Co-occurrence is counted per whole document (one turn = one document); no
//! sliding windows.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, CachedEmbedder, EmbeddingError};
use crate::topics::TopicModel;

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Error, Debug)]
pub enum TopicEvalError {
    #[error("embedding coherence needs an embedding backend")]
    MissingBackend,
    #[error("empty document collection")]
    NoDocuments,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceMetric {
    Umass,
    Uci,
    Npmi,
    W2v,
}

impl CoherenceMetric {
    pub const ALL: [CoherenceMetric; 4] = [
        CoherenceMetric::Umass,
        CoherenceMetric::Uci,
        CoherenceMetric::Npmi,
        CoherenceMetric::W2v,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CoherenceMetric::Umass => "umass",
            CoherenceMetric::Uci => "uci",
            CoherenceMetric::Npmi => "npmi",
            CoherenceMetric::W2v => "w2v",
        }
    }
}

/// Document and co-document frequencies of a word set.
#[derive(Debug, Clone, Default)]
pub struct CoherenceStats {
    pub n_documents: usize,
    doc_freq: HashMap<String, usize>,
    co_doc_freq: HashMap<(String, String), usize>,
}

fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl CoherenceStats {
    /// Count `D(w)` and `D(w, w')` for every word and pair drawn from `words`.
    pub fn from_documents<S: AsRef<str>>(documents: &[Vec<S>], words: &BTreeSet<String>) -> Self {
        let mut stats = CoherenceStats {
            n_documents: documents.len(),
            ..Default::default()
        };
        for doc in documents {
            let present: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).filter(|w| words.contains(*w)).collect();
            let present: Vec<&str> = present.into_iter().collect();
            for (i, &a) in present.iter().enumerate() {
                *stats.doc_freq.entry(a.to_string()).or_insert(0) += 1;
                for &b in &present[i + 1..] {
                    *stats.co_doc_freq.entry(ordered_pair(a, b)).or_insert(0) += 1;
                }
            }
        }
        stats
    }

    /// Merge counts from a disjoint batch of documents.
    pub fn merge(&mut self, other: CoherenceStats) {
        self.n_documents += other.n_documents;
        for (k, v) in other.doc_freq {
            *self.doc_freq.entry(k).or_insert(0) += v;
        }
        for (k, v) in other.co_doc_freq {
            *self.co_doc_freq.entry(k).or_insert(0) += v;
        }
    }

    pub fn df(&self, w: &str) -> usize {
        self.doc_freq.get(w).copied().unwrap_or(0)
    }

    pub fn co_df(&self, a: &str, b: &str) -> usize {
        if a == b {
            return self.df(a);
        }
        self.co_doc_freq.get(&ordered_pair(a, b)).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    pub value: f64,
    /// Topics that had fewer than `top_k` positive-weight words.
    pub short_topics: Vec<usize>,
}

/// Proportion of unique words among the topics' top-word lists.
pub fn topic_diversity(model: &TopicModel, top_k: usize) -> Diversity {
    let mut union = BTreeSet::new();
    let mut slots = 0usize;
    let mut short_topics = Vec::new();
    for t in 0..model.k {
        let words = model.top_word_indices(t, top_k);
        if words.len() < top_k {
            short_topics.push(t);
        }
        slots += words.len();
        union.extend(words);
    }
    let value = if slots == 0 {
        0.0
    } else {
        union.len() as f64 / slots as f64
    };
    Diversity { value, short_topics }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub metric: CoherenceMetric,
    pub per_topic: Vec<f64>,
    pub mean: f64,
    /// UMass pairs skipped because the conditioning word never occurs.
    pub skipped_pairs: usize,
}

fn umass(words: &[&str], stats: &CoherenceStats, skipped: &mut usize) -> f64 {
    let mut total = 0.0;
    for later in 1..words.len() {
        for earlier in 0..later {
            let d_earlier = stats.df(words[earlier]);
            if d_earlier == 0 {
                *skipped += 1;
                continue;
            }
            let joint = stats.co_df(words[later], words[earlier]);
            total += ((joint as f64 + 1.0) / d_earlier as f64).ln();
        }
    }
    total
}

fn pmi_parts(a: &str, b: &str, stats: &CoherenceStats, eps: f64) -> (f64, f64) {
    let n = stats.n_documents as f64;
    let pa = stats.df(a) as f64 / n;
    let pb = stats.df(b) as f64 / n;
    let pab = stats.co_df(a, b) as f64 / n;
    let pmi = ((pab + eps) / (pa * pb + eps)).ln();
    (pmi, pab)
}

fn pairs_mean(words: &[&str], mut f: impl FnMut(&str, &str) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            sum += f(words[i], words[j]);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Per-topic coherence of the `top_k` words of each topic, plus the
/// equal-weight mean over topics.
///
/// * `umass`: Σ over ordered pairs of ln((D(later, earlier) + 1) / D(earlier)),
///   pairs whose earlier word never occurs are skipped and counted.
/// * `uci`: mean over pairs of ln((p(w,w') + ε) / (p(w)p(w') + ε)).
/// * `npmi`: the same PMI divided by −ln(p(w,w') + ε).
/// * `w2v`: mean pairwise cosine of the words' embeddings.
pub fn coherence<S: AsRef<str>>(
    model: &TopicModel,
    documents: &[Vec<S>],
    metric: CoherenceMetric,
    top_k: usize,
    epsilon: f64,
    embedder: Option<&CachedEmbedder>,
) -> Result<CoherenceReport, TopicEvalError> {
    let top: Vec<Vec<&str>> = (0..model.k).map(|t| model.top_words(t, top_k)).collect();
    let mut skipped_pairs = 0;
    let per_topic: Vec<f64> = match metric {
        CoherenceMetric::W2v => {
            let embedder = embedder.ok_or(TopicEvalError::MissingBackend)?;
            top.iter()
                .map(|words| {
                    let vecs = words.iter().map(|w| embedder.embed(w)).collect::<Result<Vec<_>, _>>()?;
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for i in 0..vecs.len() {
                        for j in i + 1..vecs.len() {
                            sum += cosine(&vecs[i], &vecs[j])?;
                            count += 1;
                        }
                    }
                    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
                })
                .collect::<Result<_, TopicEvalError>>()?
        }
        _ => {
            if documents.is_empty() {
                return Err(TopicEvalError::NoDocuments);
            }
            let vocab: BTreeSet<String> = top.iter().flatten().map(|w| w.to_string()).collect();
            let stats = CoherenceStats::from_documents(documents, &vocab);
            top.iter()
                .map(|words| match metric {
                    CoherenceMetric::Umass => umass(words, &stats, &mut skipped_pairs),
                    CoherenceMetric::Uci => pairs_mean(words, |a, b| pmi_parts(a, b, &stats, epsilon).0),
                    _ => pairs_mean(words, |a, b| {
                        let (pmi, pab) = pmi_parts(a, b, &stats, epsilon);
                        let denom = -(pab + epsilon).ln();
                        if denom <= 0.0 {
                            1.0
                        } else {
                            pmi / denom
                        }
                    }),
                })
                .collect()
        }
    };
    let mean = if per_topic.is_empty() {
        0.0
    } else {
        per_topic.iter().sum::<f64>() / per_topic.len() as f64
    };
    Ok(CoherenceReport {
        metric,
        per_topic,
        mean,
        skipped_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingBackend, EmbeddingStore, Fallback, Vector};
    use std::sync::Arc;

    fn docs(d: &[&[&str]]) -> Vec<Vec<String>> {
        d.iter().map(|x| x.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn model_with(words: &[&str], rows: Vec<Vec<f64>>) -> TopicModel {
        TopicModel::new(words.iter().map(|s| s.to_string()).collect(), rows, "t").unwrap()
    }

    #[test]
    fn umass_three_document_fixture() {
        let m = model_with(&["a", "b", "c"], vec![vec![0.6, 0.4, 0.0], vec![0.0, 0.4, 0.6]]);
        let d = docs(&[&["a", "b"], &["a"], &["b"]]);
        let r = coherence(&m, &d, CoherenceMetric::Umass, 25, DEFAULT_EPSILON, None).unwrap();
        assert_eq!(r.per_topic[0], 0.0);
        // topic 2 = [c, b]; c never occurs, so its pair is skipped
        assert_eq!(r.per_topic[1], 0.0);
        assert_eq!(r.skipped_pairs, 1);
    }

    #[test]
    fn npmi_perfect_co_occurrence() {
        let m = model_with(&["a", "b", "c"], vec![vec![0.6, 0.4, 0.0], vec![0.0, 0.4, 0.6]]);
        let d = docs(&[&["a", "b"], &["a", "b", "x"], &["c"], &["y"]]);
        let r = coherence(&m, &d, CoherenceMetric::Npmi, 25, DEFAULT_EPSILON, None).unwrap();
        assert!((r.per_topic[0] - 1.0).abs() < 1e-9);
        let u = coherence(&m, &d, CoherenceMetric::Uci, 25, DEFAULT_EPSILON, None).unwrap();
        assert!((u.per_topic[0] - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn npmi_never_co_occurring_is_near_minus_one() {
        let m = model_with(&["a", "b"], vec![vec![0.6, 0.4], vec![0.4, 0.6]]);
        let d = docs(&[&["a"], &["b"]]);
        let r = coherence(&m, &d, CoherenceMetric::Npmi, 25, DEFAULT_EPSILON, None).unwrap();
        assert!(r.per_topic[0] < -0.9);
    }

    #[test]
    fn npmi_grows_with_joint_documents() {
        // fixed corpus size of 10: a and b each appear in 4 documents, overlap 1..=4
        let m = model_with(&["a", "b"], vec![vec![0.6, 0.4], vec![0.4, 0.6]]);
        let mut prev = f64::NEG_INFINITY;
        for overlap in 1..=4 {
            let mut d: Vec<Vec<String>> = Vec::new();
            for _ in 0..overlap {
                d.push(vec!["a".into(), "b".into()]);
            }
            for _ in overlap..4 {
                d.push(vec!["a".into()]);
                d.push(vec!["b".into()]);
            }
            while d.len() < 10 {
                d.push(vec!["z".into()]);
            }
            let r = coherence(&m, &d, CoherenceMetric::Npmi, 25, DEFAULT_EPSILON, None).unwrap();
            assert!(r.per_topic[0] >= prev);
            prev = r.per_topic[0];
        }
    }

    #[test]
    fn diversity_examples() {
        let vocab: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
        let shared: Vec<f64> = (0..300).map(|i| if i < 25 { 1.0 + i as f64 } else { 0.0 }).collect();
        let m = TopicModel::new(vocab.clone(), vec![shared; 10], "").unwrap();
        assert!((topic_diversity(&m, 25).value - 0.1).abs() < 1e-15);

        let disjoint: Vec<Vec<f64>> = (0..10)
            .map(|t| (0..300).map(|i| if i / 25 == t { 1.0 } else { 0.0 }).collect())
            .collect();
        let m = TopicModel::new(vocab.clone(), disjoint, "").unwrap();
        assert_eq!(topic_diversity(&m, 25).value, 1.0);

        // 5 shared words out of 25
        let t0: Vec<f64> = (0..300).map(|i| if i < 25 { 1.0 } else { 0.0 }).collect();
        let t1: Vec<f64> = (0..300)
            .map(|i| if (20..45).contains(&i) { 1.0 } else { 0.0 })
            .collect();
        let m = TopicModel::new(vocab, vec![t0, t1], "").unwrap();
        let d = topic_diversity(&m, 25);
        assert!((d.value - 0.9).abs() < 1e-15);
        assert!(d.short_topics.is_empty());
    }

    #[test]
    fn w2v_identical_vectors() {
        let mut s = EmbeddingStore::new(3).unwrap();
        for w in ["a", "b", "c"] {
            s.insert_text(w, Vector::new(vec![0.2, 0.5, -1.0])).unwrap();
        }
        let emb = crate::embedding::CachedEmbedder::new(EmbeddingBackend::store(Arc::new(s), Fallback::Error));
        let m = model_with(&["a", "b", "c"], vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.2, 0.7]]);
        let r = coherence::<String>(&m, &[], CoherenceMetric::W2v, 25, DEFAULT_EPSILON, Some(&emb)).unwrap();
        for v in r.per_topic {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            coherence::<String>(&m, &[], CoherenceMetric::W2v, 25, DEFAULT_EPSILON, None),
            Err(TopicEvalError::MissingBackend)
        ));
    }

    #[test]
    fn merged_counts_equal_single_pass() {
        let words: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let d = docs(&[&["a", "b"], &["a", "c", "a"], &["b", "c"], &["c"]]);
        let whole = CoherenceStats::from_documents(&d, &words);
        let mut left = CoherenceStats::from_documents(&d[..2], &words);
        left.merge(CoherenceStats::from_documents(&d[2..], &words));
        for a in &words {
            assert_eq!(whole.df(a), left.df(a));
            for b in &words {
                assert_eq!(whole.co_df(a, b), left.co_df(a, b));
                assert!(whole.co_df(a, b) <= whole.df(a).min(whole.df(b)));
            }
        }
        assert_eq!(whole.df("a"), 2);
        assert_eq!(whole.n_documents, left.n_documents);
    }
}
