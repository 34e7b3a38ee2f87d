//! Topic models and turn-level topic scoring.
//!
//! A [`TopicModel`] is a K×V topic-word weight matrix, either loaded from JSON
//! (any external trainer) or learned by the TF-IDF/SVD baseline in
//! [`baseline`]. Topics are embedded as the weighted mean of their top words,
//! and every turn gets a K-vector of cosine similarities to those topic vectors.

pub mod baseline;
pub mod pca;
pub mod prompts;
pub mod ranking;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Condition, Session, Speaker, Turn};
use crate::embedding::{cosine, CachedEmbedder, EmbeddingError, Vector};

pub use baseline::{learn_baseline_topics, BaselineTopicConfig};
pub use pca::{principal_topics, project_principal, PrincipalTopics, DEFAULT_COMPONENTS};
pub use prompts::{export_prompts, InterpretationRequest, PromptTemplate, TopicSelection};
pub use ranking::{top_turns, RankedTurn};

pub const DEFAULT_TOPICS: usize = 10;
pub const DEFAULT_TOP_K: usize = 25;

#[derive(Error, Debug)]
pub enum TopicError {
    #[error("invalid topic model: {0}")]
    InvalidModel(String),
    #[error("topic {0} has no positive word weights")]
    AllZeroRow(usize),
    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),
    #[error("need more samples than topics: {samples} samples for {topics} topics")]
    TooFewSamples { samples: usize, topics: usize },
    #[error("topic-score matrix has rank {achieved}, fewer than the {requested} requested components")]
    RankDeficient { achieved: usize, requested: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("topic model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub vocabulary: Vec<String>,
    pub topic_word: Vec<Vec<f64>>,
    #[serde(default)]
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_vectors: Option<Vec<Vector>>,
}

impl TopicModel {
    pub fn new(
        vocabulary: Vec<String>,
        topic_word: Vec<Vec<f64>>,
        provenance: impl Into<String>,
    ) -> Result<Self, TopicError> {
        let model = Self {
            k: topic_word.len(),
            vocabulary,
            topic_word,
            provenance: provenance.into(),
            topic_vectors: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), TopicError> {
        let v = self.vocabulary.len();
        if self.k < 2 {
            return Err(TopicError::InvalidModel(format!("K = {} (need >= 2)", self.k)));
        }
        if self.topic_word.len() != self.k {
            return Err(TopicError::InvalidModel(format!(
                "K = {} but topic_word has {} rows",
                self.k,
                self.topic_word.len()
            )));
        }
        if v < self.k {
            return Err(TopicError::InvalidModel(format!(
                "vocabulary size {v} < K = {}",
                self.k
            )));
        }
        for (i, row) in self.topic_word.iter().enumerate() {
            if row.len() != v {
                return Err(TopicError::InvalidModel(format!(
                    "row {i} has {} entries, vocabulary has {v}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(TopicError::InvalidModel(format!("row {i} has non-finite weights")));
            }
        }
        if let Some(tv) = &self.topic_vectors {
            if tv.len() != self.k {
                return Err(TopicError::InvalidModel("topic_vectors length differs from K".into()));
            }
            if tv.iter().any(|x| x.dim() != tv[0].dim()) {
                return Err(TopicError::InvalidModel("topic_vectors have mixed dimensions".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TopicError> {
        let model: TopicModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, TopicError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topic model serializes")
    }

    /// Indices of the `top_k` highest positive weights of a topic, by weight
    /// descending then vocabulary position ascending. May return fewer than
    /// `top_k` when the row has fewer positive weights.
    pub fn top_word_indices(&self, topic: usize, top_k: usize) -> Vec<usize> {
        let row = &self.topic_word[topic];
        let mut idx: Vec<usize> = (0..row.len()).filter(|&i| row[i] > 0.0).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx.truncate(top_k);
        idx
    }

    pub fn top_words(&self, topic: usize, top_k: usize) -> Vec<&str> {
        self.top_word_indices(topic, top_k)
            .into_iter()
            .map(|i| self.vocabulary[i].as_str())
            .collect()
    }
}

/// Embed each topic as the weight-normalized mean of its top words' embeddings,
/// L2-normalized.
pub fn derive_topic_vectors(
    model: &TopicModel,
    embedder: &CachedEmbedder,
    top_k: usize,
) -> Result<Vec<Vector>, TopicError> {
    let dim = embedder.dim();
    (0..model.k)
        .map(|topic| {
            let idx = model.top_word_indices(topic, top_k);
            let total: f64 = idx.iter().map(|&i| model.topic_word[topic][i]).sum();
            if idx.is_empty() || total <= 0.0 {
                return Err(TopicError::AllZeroRow(topic));
            }
            let mut acc = vec![0f64; dim];
            for &i in &idx {
                let w = model.topic_word[topic][i] / total;
                let e = embedder.embed(&model.vocabulary[i])?;
                if e.dim() != dim {
                    return Err(TopicError::DimensionMismatch {
                        expected: dim,
                        found: e.dim(),
                    });
                }
                for (a, &x) in acc.iter_mut().zip(e.as_slice()) {
                    *a += w * f64::from(x);
                }
            }
            let n = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                acc.iter_mut().for_each(|x| *x /= n);
            }
            Ok(Vector::new(acc.into_iter().map(|x| x as f32).collect()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnTopicScore {
    pub session_id: String,
    pub condition: Condition,
    pub turn_index: usize,
    pub speaker: Speaker,
    pub scores: Vec<f64>,
}

pub fn score_turn_topics(
    session: &Session,
    turn: &Turn,
    topic_vectors: &[Vector],
    embedder: &CachedEmbedder,
) -> Result<TurnTopicScore, TopicError> {
    let emb = embedder.embed(&turn.text)?;
    let scores = topic_vectors
        .iter()
        .map(|t| cosine(t, &emb))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TurnTopicScore {
        session_id: session.session_id.clone(),
        condition: session.condition,
        turn_index: turn.index,
        speaker: turn.speaker,
        scores,
    })
}

/// Topic scores for every turn of every session, grouped per session in corpus order.
pub fn score_corpus_topics(
    corpus: &[Session],
    topic_vectors: &[Vector],
    embedder: &CachedEmbedder,
) -> Result<Vec<Vec<TurnTopicScore>>, TopicError> {
    corpus
        .par_iter()
        .map(|s| {
            s.turns
                .iter()
                .map(|t| score_turn_topics(s, t, topic_vectors, embedder))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingBackend, EmbeddingStore, Fallback};
    use std::sync::Arc;

    fn store_embedder(entries: &[(&str, Vec<f32>)]) -> CachedEmbedder {
        let mut s = EmbeddingStore::new(entries[0].1.len()).unwrap();
        for (t, v) in entries {
            s.insert_text(t, Vector::new(v.clone())).unwrap();
        }
        CachedEmbedder::new(EmbeddingBackend::store(Arc::new(s), Fallback::Error))
    }

    fn model(rows: Vec<Vec<f64>>, vocab: &[&str]) -> TopicModel {
        TopicModel::new(vocab.iter().map(|s| s.to_string()).collect(), rows, "test").unwrap()
    }

    #[test]
    fn single_word_topic_vector() {
        let emb = store_embedder(&[
            ("a", vec![3.0, 4.0, 0.0]),
            ("b", vec![0.0, 0.0, 1.0]),
            ("c", vec![1.0, 1.0, 1.0]),
        ]);
        let m = model(vec![vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 0.0]], &["a", "b", "c"]);
        let tv = derive_topic_vectors(&m, &emb, 25).unwrap();
        assert_eq!(tv[0].as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(tv[1].as_slice(), &[0.6, 0.8, 0.0]);
    }

    #[test]
    fn equal_weights_orthonormal_words() {
        let emb = store_embedder(&[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]);
        let m = model(vec![vec![0.5, 0.5], vec![1.0, 0.0]], &["a", "b"]);
        let tv = derive_topic_vectors(&m, &emb, 25).unwrap();
        let s = std::f32::consts::FRAC_1_SQRT_2;
        assert!((tv[0].as_slice()[0] - s).abs() < 1e-7);
        assert!((tv[0].as_slice()[1] - s).abs() < 1e-7);
    }

    #[test]
    fn weighted_three_word_topic() {
        let e = [vec![1.0f32, 0.0, 2.0], vec![0.0, 1.0, -1.0], vec![2.0, 2.0, 0.0]];
        let emb = store_embedder(&[("x", e[0].clone()), ("y", e[1].clone()), ("z", e[2].clone())]);
        let m = model(vec![vec![0.5, 0.3, 0.2], vec![0.0, 0.0, 1.0]], &["x", "y", "z"]);
        let tv = derive_topic_vectors(&m, &emb, 25).unwrap();
        // 0.5·x + 0.3·y + 0.2·z = (0.9, 0.7, 0.7), norm sqrt(1.79)
        let n = 1.79f64.sqrt();
        for (got, want) in tv[0].as_slice().iter().zip([0.9 / n, 0.7 / n, 0.7 / n]) {
            assert!((f64::from(*got) - want).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_row_is_an_error() {
        let emb = store_embedder(&[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]);
        let m = model(vec![vec![0.0, 0.0], vec![1.0, 0.0]], &["a", "b"]);
        assert!(matches!(
            derive_topic_vectors(&m, &emb, 25),
            Err(TopicError::AllZeroRow(0))
        ));
    }

    #[test]
    fn turn_scores_on_orthonormal_topics() {
        let emb = store_embedder(&[("t3", vec![0.0, 0.0, 2.0, 0.0]), ("x", vec![1.0, 0.0, 0.0, 0.0])]);
        let topics: Vec<Vector> = (0..4)
            .map(|i| {
                let mut v = vec![0f32; 4];
                v[i] = 1.0;
                Vector::new(v)
            })
            .collect();
        let session = Session {
            session_id: "s".into(),
            condition: Condition::Anxiety,
            turns: vec![
                Turn {
                    index: 0,
                    speaker: Speaker::Patient,
                    text: "t3".into(),
                },
                Turn {
                    index: 1,
                    speaker: Speaker::Therapist,
                    text: "!!".into(),
                },
            ],
        };
        let emb_fb = {
            let mut s = EmbeddingStore::new(8).unwrap();
            s.insert_text("q", Vector::zeros(8)).unwrap();
            CachedEmbedder::new(EmbeddingBackend::store(Arc::new(s), Fallback::Baseline))
        };
        let s = score_turn_topics(&session, &session.turns[0], &topics, &emb).unwrap();
        assert_eq!(s.scores, vec![0.0, 0.0, 1.0, 0.0]);
        let again = score_turn_topics(&session, &session.turns[0], &topics, &emb).unwrap();
        assert_eq!(s, again);
        // punctuation-only turn embeds to the zero vector under the baseline
        let topics8: Vec<Vector> = (0..3)
            .map(|i| {
                let mut v = vec![0f32; 8];
                v[i] = 1.0;
                Vector::new(v)
            })
            .collect();
        let z = score_turn_topics(&session, &session.turns[1], &topics8, &emb_fb).unwrap();
        assert_eq!(z.scores, vec![0.0; 3]);
    }

    #[test]
    fn model_validation() {
        let v: Vec<String> = vec!["a".into(), "b".into()];
        assert!(TopicModel::new(v.clone(), vec![vec![1.0, 0.0]], "").is_err());
        assert!(TopicModel::new(v.clone(), vec![vec![1.0], vec![1.0]], "").is_err());
        assert!(TopicModel::new(v.clone(), vec![vec![1.0, f64::NAN], vec![1.0, 0.0]], "").is_err());
        let m = TopicModel::new(v, vec![vec![0.2, 0.8], vec![1.0, 0.0]], "p").unwrap();
        let back = TopicModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_json().contains("\"K\": 2"));
        assert_eq!(m.top_words(0, 25), vec!["b", "a"]);
        assert_eq!(m.top_words(1, 25), vec!["a"]);
    }
}
