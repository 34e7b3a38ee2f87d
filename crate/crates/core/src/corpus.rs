//! Transcript data model: sessions, turns and patient/therapist dyads.
//!
//! A session arrives as a single JSON document:
//!
//! ```json
//! {"session_id": "s1", "condition": "anxiety",
//!  "turns": [{"speaker": "patient", "text": "Hello"}, {"speaker": "therapist", "text": "Hi"}]}
//! ```
//!
//! A corpus is a directory of such documents read in lexicographic filename order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CorpusError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing field `{field}`")]
    MissingField { field: String },
    #[error("unknown condition label {label:?} (field `condition`)")]
    UnknownCondition { label: String },
    #[error("unknown speaker tag {tag:?} at turns[{turn}].speaker")]
    UnknownSpeaker { tag: String, turn: usize },
    #[error("empty turn list (field `turns`)")]
    EmptyTurns,
    #[error("turns[{turn}].text is empty after whitespace trim")]
    BlankTurn { turn: usize },
    #[error("duplicate session_id {0:?} in corpus")]
    DuplicateSession(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Clinical condition label of a session.
///
/// Declaration order is the fixed reporting order used across all tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Anxiety,
    Depression,
    Schizophrenia,
    Suicidality,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Anxiety,
        Condition::Depression,
        Condition::Schizophrenia,
        Condition::Suicidality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Anxiety => "anxiety",
            Condition::Depression => "depression",
            Condition::Schizophrenia => "schizophrenia",
            Condition::Suicidality => "suicidality",
        }
    }

    /// Position in the fixed condition order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Condition> {
        Self::ALL.get(i).copied()
    }

    /// Title-case label used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Condition::Anxiety => "Anxiety",
            Condition::Depression => "Depression",
            Condition::Schizophrenia => "Schizophrenia",
            Condition::Suicidality => "Suicidality",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownCondition { label: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Patient,
    Therapist,
}

impl Speaker {
    pub const BOTH: [Speaker; 2] = [Speaker::Patient, Speaker::Therapist];

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Patient => "patient",
            Speaker::Therapist => "therapist",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Speaker {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "patient" => Ok(Speaker::Patient),
            "therapist" => Ok(Speaker::Therapist),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub condition: Condition,
    pub turns: Vec<Turn>,
}

/// A patient turn and the therapist turn that answers it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dyad<'a> {
    pub patient_turn: &'a Turn,
    pub therapist_turn: &'a Turn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub min: usize,
    pub median: f64,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sessions_per_condition: BTreeMap<Condition, usize>,
    pub patient_turns: usize,
    pub therapist_turns: usize,
    pub session_length: Option<LengthSummary>,
}

#[derive(Deserialize)]
struct RawTurn {
    speaker: String,
    text: String,
}

#[derive(Deserialize)]
struct RawSession {
    session_id: Option<String>,
    condition: Option<String>,
    turns: Option<Vec<RawTurn>>,
}

#[derive(Serialize)]
struct WireTurn<'a> {
    speaker: &'a str,
    text: &'a str,
}

#[derive(Serialize)]
struct WireSession<'a> {
    session_id: &'a str,
    condition: &'a str,
    turns: Vec<WireTurn<'a>>,
}

/// Parse one transcript document.
pub fn parse_session(document: &str) -> Result<Session, CorpusError> {
    let raw: RawSession = serde_json::from_str(document).map_err(|e| CorpusError::Malformed {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let session_id = raw.session_id.ok_or_else(|| CorpusError::MissingField {
        field: "session_id".into(),
    })?;
    let condition: Condition = raw
        .condition
        .ok_or_else(|| CorpusError::MissingField {
            field: "condition".into(),
        })?
        .parse()?;
    let raw_turns = raw
        .turns
        .ok_or_else(|| CorpusError::MissingField { field: "turns".into() })?;
    if raw_turns.is_empty() {
        return Err(CorpusError::EmptyTurns);
    }
    let mut turns = Vec::with_capacity(raw_turns.len());
    for (index, t) in raw_turns.into_iter().enumerate() {
        let speaker = t
            .speaker
            .parse()
            .map_err(|tag| CorpusError::UnknownSpeaker { tag, turn: index })?;
        if t.text.trim().is_empty() {
            return Err(CorpusError::BlankTurn { turn: index });
        }
        turns.push(Turn {
            index,
            speaker,
            text: t.text,
        });
    }
    Ok(Session {
        session_id,
        condition,
        turns,
    })
}

/// Render a session back into the transcript JSON format.
pub fn serialize_session(session: &Session) -> String {
    let wire = WireSession {
        session_id: &session.session_id,
        condition: session.condition.as_str(),
        turns: session
            .turns
            .iter()
            .map(|t| WireTurn {
                speaker: t.speaker.as_str(),
                text: &t.text,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&wire).expect("session serialization is infallible")
}

/// Load every `*.json` file of a directory, in lexicographic filename order.
pub fn load_corpus(dir: &Path) -> Result<Vec<Session>, CorpusError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut sessions = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let session = parse_session(&text).map_err(|e| CorpusError::File {
            path: path.clone(),
            source: Box::new(e),
        })?;
        sessions.push(session);
    }
    check_unique_ids(&sessions)?;
    Ok(sessions)
}

pub fn check_unique_ids(sessions: &[Session]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for s in sessions {
        if !seen.insert(s.session_id.as_str()) {
            return Err(CorpusError::DuplicateSession(s.session_id.clone()));
        }
    }
    Ok(())
}

/// Write sessions as `<session_id>.json` files into `dir`.
pub fn write_corpus(dir: &Path, sessions: &[Session]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir)?;
    for s in sessions {
        fs::write(dir.join(format!("{}.json", s.session_id)), serialize_session(s))?;
    }
    Ok(())
}

/// Positions of the (patient, therapist) pairs in a speaker sequence.
///
/// Each patient turn is matched with the immediately following therapist turn.
/// Leading therapist turns and patient turns followed by another patient turn
/// stay unpaired.
pub fn pair_positions(speakers: &[Speaker]) -> Vec<(usize, usize)> {
    speakers
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] == Speaker::Patient && w[1] == Speaker::Therapist)
        .map(|(i, _)| (i, i + 1))
        .collect()
}

pub fn pair_turns(session: &Session) -> Vec<Dyad<'_>> {
    let speakers: Vec<Speaker> = session.turns.iter().map(|t| t.speaker).collect();
    pair_positions(&speakers)
        .into_iter()
        .map(|(p, t)| Dyad {
            patient_turn: &session.turns[p],
            therapist_turn: &session.turns[t],
        })
        .collect()
}

pub fn corpus_stats(sessions: &[Session]) -> CorpusStats {
    let mut sessions_per_condition: BTreeMap<Condition, usize> = Condition::ALL.iter().map(|&c| (c, 0)).collect();
    let mut patient_turns = 0;
    let mut therapist_turns = 0;
    let mut lengths = Vec::with_capacity(sessions.len());
    for s in sessions {
        *sessions_per_condition.entry(s.condition).or_default() += 1;
        for t in &s.turns {
            match t.speaker {
                Speaker::Patient => patient_turns += 1,
                Speaker::Therapist => therapist_turns += 1,
            }
        }
        lengths.push(s.turns.len());
    }
    lengths.sort_unstable();
    let session_length = if lengths.is_empty() {
        None
    } else {
        let n = lengths.len();
        let median = if n % 2 == 1 {
            lengths[n / 2] as f64
        } else {
            (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0
        };
        Some(LengthSummary {
            min: lengths[0],
            median,
            max: lengths[n - 1],
        })
    };
    CorpusStats {
        sessions_per_condition,
        patient_turns,
        therapist_turns,
        session_length,
    }
}
