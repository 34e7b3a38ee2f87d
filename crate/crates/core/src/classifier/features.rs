//! Per-dyad feature sequences for session classification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::alliance::AllianceSeries;
use crate::corpus::{pair_turns, Condition, Session, Turn};
use crate::embedding::CachedEmbedder;

use super::ClassifierError;

pub const DEFAULT_MAX_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleMode {
    Patient,
    Therapist,
    #[default]
    Both,
}

impl RoleMode {
    pub const ALL: [RoleMode; 3] = [RoleMode::Patient, RoleMode::Therapist, RoleMode::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleMode::Patient => "patient",
            RoleMode::Therapist => "therapist",
            RoleMode::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// The 36 item similarities.
    Scores,
    /// The turn embedding.
    Embedding,
    /// Embedding followed by the 36 similarities.
    #[default]
    Combined,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Scores, FeatureMode::Embedding, FeatureMode::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Scores => "scores",
            FeatureMode::Embedding => "embedding",
            FeatureMode::Combined => "combined",
        }
    }

    pub fn uses_embedding(self) -> bool {
        !matches!(self, FeatureMode::Scores)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub role_mode: RoleMode,
    pub feature_mode: FeatureMode,
    pub max_len: usize,
    /// Build the patient half of a dyad from the therapist turn.
    pub mirror_therapist: bool,
    /// With both roles, emit patient and therapist features as separate steps
    /// instead of one concatenated step per dyad.
    pub interleave: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            role_mode: RoleMode::Both,
            feature_mode: FeatureMode::Combined,
            max_len: DEFAULT_MAX_LEN,
            mirror_therapist: false,
            interleave: false,
        }
    }
}

impl FeatureOptions {
    /// Width of one step given the embedding dimension.
    pub fn feature_dim(&self, embedding_dim: usize) -> usize {
        let role = match self.feature_mode {
            FeatureMode::Scores => 36,
            FeatureMode::Embedding => embedding_dim,
            FeatureMode::Combined => embedding_dim + 36,
        };
        match self.role_mode {
            RoleMode::Both if !self.interleave => 2 * role,
            _ => role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub session_id: String,
    pub label: Condition,
    /// Exactly `max_len` rows; masked rows are zero.
    pub steps: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub feature_dim: usize,
}

impl FeatureSequence {
    /// Pad (or truncate) unmasked rows to `len` steps.
    pub fn from_rows(
        session_id: impl Into<String>,
        label: Condition,
        rows: Vec<Vec<f64>>,
        len: usize,
    ) -> Result<Self, ClassifierError> {
        let session_id = session_id.into();
        let feature_dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| ClassifierError::EmptyDyads(session_id.clone()))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != feature_dim) {
            return Err(ClassifierError::DimensionMismatch {
                expected: feature_dim,
                found: bad.len(),
            });
        }
        let valid = rows.len().min(len);
        let mut steps: Vec<Vec<f64>> = rows.into_iter().take(len).collect();
        steps.resize(len, vec![0.0; feature_dim]);
        let mask = (0..len).map(|i| i < valid).collect();
        Ok(Self {
            session_id,
            label,
            steps,
            mask,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn valid_steps(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Copy with `extra` more masked zero steps appended.
    pub fn padded(&self, extra: usize) -> Self {
        let mut out = self.clone();
        out.steps
            .extend(std::iter::repeat_n(vec![0.0; self.feature_dim], extra));
        out.mask.extend(std::iter::repeat_n(false, extra));
        out
    }
}

/// Build the feature sequence for one scored session.
///
/// `embedder` is required unless the feature mode is [`FeatureMode::Scores`].
pub fn build_features(
    session: &Session,
    series: &AllianceSeries,
    embedder: Option<&CachedEmbedder>,
    options: &FeatureOptions,
) -> Result<FeatureSequence, ClassifierError> {
    if options.max_len == 0 {
        return Err(ClassifierError::InvalidConfig("max_len must be positive".into()));
    }
    if series.session_id != session.session_id {
        return Err(ClassifierError::Misaligned(session.session_id.clone()));
    }
    let sims: HashMap<usize, &[f64]> = series
        .patient
        .iter()
        .chain(&series.therapist)
        .map(|t| (t.turn_index, t.sim36.as_slice()))
        .collect();
    let role_feature = |turn: &Turn| -> Result<Vec<f64>, ClassifierError> {
        let mut out = Vec::new();
        if options.feature_mode.uses_embedding() {
            let e = embedder.ok_or(ClassifierError::MissingEmbedding)?;
            out.extend(e.embed(&turn.text)?.as_slice().iter().map(|&x| x as f64));
        }
        if options.feature_mode != FeatureMode::Embedding {
            let s = sims
                .get(&turn.index)
                .ok_or_else(|| ClassifierError::Misaligned(session.session_id.clone()))?;
            out.extend_from_slice(s);
        }
        Ok(out)
    };

    let dyads = pair_turns(session);
    if dyads.is_empty() {
        return Err(ClassifierError::EmptyDyads(session.session_id.clone()));
    }
    let per_dyad = match options.role_mode {
        RoleMode::Both if options.interleave => 2,
        _ => 1,
    };
    let needed = dyads.len().min(options.max_len.div_ceil(per_dyad));
    let mut rows = Vec::with_capacity(needed * per_dyad);
    for d in dyads.iter().take(needed) {
        let patient_source = if options.mirror_therapist {
            d.therapist_turn
        } else {
            d.patient_turn
        };
        match options.role_mode {
            RoleMode::Patient => rows.push(role_feature(patient_source)?),
            RoleMode::Therapist => rows.push(role_feature(d.therapist_turn)?),
            RoleMode::Both if options.interleave => {
                rows.push(role_feature(patient_source)?);
                rows.push(role_feature(d.therapist_turn)?);
            }
            RoleMode::Both => {
                let mut row = role_feature(d.therapist_turn)?;
                row.extend(role_feature(patient_source)?);
                rows.push(row);
            }
        }
    }
    FeatureSequence::from_rows(session.session_id.clone(), session.condition, rows, options.max_len)
}
