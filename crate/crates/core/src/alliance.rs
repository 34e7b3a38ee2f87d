//! Turn-level working-alliance inference.
//!
//! Every turn is embedded and compared by cosine similarity with the 36
//! inventory items of its speaker's version (client wording for patient turns,
//! therapist wording for therapist turns). The resulting 36-vector is folded
//! into Task/Bond/Goal scores through the signed key table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Condition, Session, Speaker, Turn};
use crate::embedding::{cosine, CachedEmbedder, EmbeddingError, Vector};
use crate::inventory::{aggregate_scales, Inventory, InventoryError, KeyTable, ScaleScores, ITEM_COUNT};

#[derive(Error, Debug)]
pub enum AllianceError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error("expected {ITEM_COUNT} inventory vectors, got {0}")]
    InventorySize(usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("standardization group ({role}, {channel}) has {count} turns; need at least 2")]
    TooFewTurns {
        role: Speaker,
        channel: &'static str,
        count: usize,
    },
    #[error("standardization group ({role}, {channel}) has zero variance")]
    ZeroVariance { role: Speaker, channel: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnAllianceScore {
    pub session_id: String,
    pub turn_index: usize,
    pub speaker: Speaker,
    pub sim36: Vec<f64>,
    pub scales: ScaleScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllianceSeries {
    pub session_id: String,
    pub condition: Condition,
    pub patient: Vec<TurnAllianceScore>,
    pub therapist: Vec<TurnAllianceScore>,
    pub standardized: bool,
}

impl AllianceSeries {
    pub fn role(&self, speaker: Speaker) -> &[TurnAllianceScore] {
        match speaker {
            Speaker::Patient => &self.patient,
            Speaker::Therapist => &self.therapist,
        }
    }

    fn role_mut(&mut self, speaker: Speaker) -> &mut Vec<TurnAllianceScore> {
        match speaker {
            Speaker::Patient => &mut self.patient,
            Speaker::Therapist => &mut self.therapist,
        }
    }

    /// All scored turns in session order.
    pub fn turns_in_order(&self) -> Vec<&TurnAllianceScore> {
        let mut all: Vec<&TurnAllianceScore> = self.patient.iter().chain(&self.therapist).collect();
        all.sort_by_key(|t| t.turn_index);
        all
    }
}

/// One output row: a scored turn with its session's condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub session_id: String,
    pub condition: Condition,
    pub turn_index: usize,
    pub speaker: Speaker,
    pub sim36: Vec<f64>,
    pub task: f64,
    pub bond: f64,
    pub goal: f64,
    pub full: f64,
}

pub fn records(series: &[AllianceSeries]) -> Vec<TurnRecord> {
    series
        .iter()
        .flat_map(|s| {
            s.turns_in_order().into_iter().map(move |t| TurnRecord {
                session_id: s.session_id.clone(),
                condition: s.condition,
                turn_index: t.turn_index,
                speaker: t.speaker,
                sim36: t.sim36.clone(),
                task: t.scales.task,
                bond: t.scales.bond,
                goal: t.scales.goal,
                full: t.scales.full,
            })
        })
        .collect()
}

/// Similarity of one turn against the 36 item embeddings of its speaker's version.
pub fn score_turn(
    session_id: &str,
    turn: &Turn,
    item_vectors: &[Vector],
    key: &KeyTable,
    embedder: &CachedEmbedder,
) -> Result<TurnAllianceScore, AllianceError> {
    if item_vectors.len() != ITEM_COUNT {
        return Err(AllianceError::InventorySize(item_vectors.len()));
    }
    let emb = embedder.embed(&turn.text)?;
    let sim36 = item_vectors
        .iter()
        .map(|item| cosine(item, &emb))
        .collect::<Result<Vec<f64>, _>>()?;
    let scales = aggregate_scales(&sim36, key)?;
    Ok(TurnAllianceScore {
        session_id: session_id.to_string(),
        turn_index: turn.index,
        speaker: turn.speaker,
        sim36,
        scales,
    })
}

/// Inventory embedded once per run, for both respondent versions.
pub struct AllianceScorer<'a> {
    pub inventory: &'a Inventory,
    pub embedder: &'a CachedEmbedder,
    client_vectors: Vec<Vector>,
    therapist_vectors: Vec<Vector>,
}

impl<'a> AllianceScorer<'a> {
    pub fn new(inventory: &'a Inventory, embedder: &'a CachedEmbedder) -> Result<Self, AllianceError> {
        let embed_all = |speaker| -> Result<Vec<Vector>, EmbeddingError> {
            inventory.texts(speaker).map(|t| embedder.embed(t)).collect()
        };
        Ok(Self {
            inventory,
            embedder,
            client_vectors: embed_all(Speaker::Patient)?,
            therapist_vectors: embed_all(Speaker::Therapist)?,
        })
    }

    pub fn item_vectors(&self, speaker: Speaker) -> &[Vector] {
        match speaker {
            Speaker::Patient => &self.client_vectors,
            Speaker::Therapist => &self.therapist_vectors,
        }
    }

    pub fn score_turn(&self, session_id: &str, turn: &Turn) -> Result<TurnAllianceScore, AllianceError> {
        score_turn(
            session_id,
            turn,
            self.item_vectors(turn.speaker),
            &self.inventory.key,
            self.embedder,
        )
    }

    pub fn score_session(&self, session: &Session) -> Result<AllianceSeries, AllianceError> {
        let mut series = AllianceSeries {
            session_id: session.session_id.clone(),
            condition: session.condition,
            patient: Vec::new(),
            therapist: Vec::new(),
            standardized: false,
        };
        for turn in &session.turns {
            let scored = self.score_turn(&session.session_id, turn)?;
            series.role_mut(turn.speaker).push(scored);
        }
        Ok(series)
    }

    /// Score every session; sessions fan out across threads, output keeps corpus order.
    pub fn score_corpus(&self, corpus: &[Session]) -> Result<Vec<AllianceSeries>, AllianceError> {
        if corpus.is_empty() {
            return Err(AllianceError::EmptyCorpus);
        }
        corpus.par_iter().map(|s| self.score_session(s)).collect()
    }
}

pub fn score_corpus(
    corpus: &[Session],
    inventory: &Inventory,
    embedder: &CachedEmbedder,
) -> Result<Vec<AllianceSeries>, AllianceError> {
    AllianceScorer::new(inventory, embedder)?.score_corpus(corpus)
}

const CHANNELS: [&str; 4] = ["task", "bond", "goal", "full"];

fn channel_mut(s: &mut ScaleScores, c: usize) -> &mut f64 {
    match c {
        0 => &mut s.task,
        1 => &mut s.bond,
        2 => &mut s.goal,
        _ => &mut s.full,
    }
}

fn channel(s: &ScaleScores, c: usize) -> f64 {
    match c {
        0 => s.task,
        1 => s.bond,
        2 => s.goal,
        _ => s.full,
    }
}

/// Z-score each of task/bond/goal/full per speaker role, pooled over the corpus,
/// using the population standard deviation. `sim36` is left untouched.
pub fn standardize(series: &[AllianceSeries]) -> Result<Vec<AllianceSeries>, AllianceError> {
    let mut out = series.to_vec();
    for role in Speaker::BOTH {
        for (c, name) in CHANNELS.iter().enumerate() {
            let values: Vec<f64> = series
                .iter()
                .flat_map(|s| s.role(role).iter().map(|t| channel(&t.scales, c)))
                .collect();
            if values.len() < 2 {
                return Err(AllianceError::TooFewTurns {
                    role,
                    channel: name,
                    count: values.len(),
                });
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd.is_nan() || sd <= f64::EPSILON * mean.abs().max(1.0) {
                return Err(AllianceError::ZeroVariance { role, channel: name });
            }
            for s in out.iter_mut() {
                for t in s.role_mut(role).iter_mut() {
                    let v = channel_mut(&mut t.scales, c);
                    *v = (*v - mean) / sd;
                }
            }
        }
    }
    for s in out.iter_mut() {
        s.standardized = true;
    }
    Ok(out)
}
