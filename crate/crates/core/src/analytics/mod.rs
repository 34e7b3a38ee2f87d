//! Per-condition trajectories, patient–therapist discrepancies, condition-wise
//! significance tests and topic-conditioned alliance heatmaps.
//!
//! Everything here operates on [`ScoredSession`]s: a session's turns in order,
//! each carrying (standardized) alliance scales and, optionally, topic scores
//! and principal-topic coordinates.

pub mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alliance::AllianceSeries;
use crate::corpus::{pair_positions, Condition, Speaker};
use crate::inventory::{Scale, ScaleScores};
use crate::topics::{project_principal, PrincipalTopics, TopicError, TurnTopicScore};

pub use stats::{format_sci, star_notation, t_test, TTestResult, TTestVariant};

pub const DEFAULT_MAX_INDEX: usize = 100;
pub const DEFAULT_HEATMAP_TURNS: usize = 100;

#[derive(Error, Debug)]
pub enum AnalyticsError {
    #[error("condition {0} has no sessions")]
    NoSessions(Condition),
    #[error("no dyads available for condition {0}")]
    NoDyads(Condition),
    #[error("channel {0} is not available on these sessions")]
    MissingChannel(Channel),
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),
    #[error("p-value {0} outside [0, 1]")]
    PValueRange(f64),
    #[error("need at least two conditions with data, found {0}")]
    TooFewConditions(usize),
    #[error("no qualifying turns: {0}")]
    NoQualifyingTurns(String),
    #[error("topic scores do not line up with session {0}")]
    Misaligned(String),
    #[error(transparent)]
    Topic(#[from] TopicError),
}

/// A per-turn scalar signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Task,
    Bond,
    Goal,
    Full,
    /// Raw topic score, 0-based topic index.
    Topic(usize),
    /// Principal-topic coordinate, 0-based component index.
    Principal(usize),
}

impl Channel {
    pub const SCALES: [Channel; 4] = [Channel::Task, Channel::Bond, Channel::Goal, Channel::Full];

    pub fn from_scale(scale: Scale) -> Self {
        match scale {
            Scale::Task => Channel::Task,
            Scale::Bond => Channel::Bond,
            Scale::Goal => Channel::Goal,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Task => f.write_str("task"),
            Channel::Bond => f.write_str("bond"),
            Channel::Goal => f.write_str("goal"),
            Channel::Full => f.write_str("full"),
            Channel::Topic(k) => write!(f, "topic_{}", k + 1),
            Channel::Principal(m) => write!(f, "PT_{}", m + 1),
        }
    }
}

impl FromStr for Channel {
    type Err = String;

    /// Parses `task`, `bond`, `goal`, `full`, `topic_<k>` and `PT_<m>` (1-based).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let idx = |rest: &str| -> Result<usize, String> {
            match rest.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n - 1),
                _ => Err(format!("bad channel index in {s:?}")),
            }
        };
        match s {
            "task" => Ok(Channel::Task),
            "bond" => Ok(Channel::Bond),
            "goal" => Ok(Channel::Goal),
            "full" => Ok(Channel::Full),
            _ => {
                if let Some(rest) = s.strip_prefix("topic_") {
                    Ok(Channel::Topic(idx(rest)?))
                } else if let Some(rest) = s.strip_prefix("PT_").or_else(|| s.strip_prefix("pt_")) {
                    Ok(Channel::Principal(idx(rest)?))
                } else {
                    Err(format!("unknown channel {s:?}"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTurn {
    pub turn_index: usize,
    pub speaker: Speaker,
    pub alliance: ScaleScores,
    pub topics: Option<Vec<f64>>,
    pub principal: Option<Vec<f64>>,
}

impl ScoredTurn {
    pub fn value(&self, channel: Channel) -> Option<f64> {
        match channel {
            Channel::Task => Some(self.alliance.task),
            Channel::Bond => Some(self.alliance.bond),
            Channel::Goal => Some(self.alliance.goal),
            Channel::Full => Some(self.alliance.full),
            Channel::Topic(k) => self.topics.as_ref().and_then(|t| t.get(k).copied()),
            Channel::Principal(m) => self.principal.as_ref().and_then(|t| t.get(m).copied()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSession {
    pub session_id: String,
    pub condition: Condition,
    /// Turns in session order.
    pub turns: Vec<ScoredTurn>,
}

impl ScoredSession {
    /// Values of one role on one channel, in session order.
    pub fn role_values(&self, role: Speaker, channel: Channel) -> Result<Vec<f64>, AnalyticsError> {
        self.turns
            .iter()
            .filter(|t| t.speaker == role)
            .map(|t| t.value(channel).ok_or(AnalyticsError::MissingChannel(channel)))
            .collect()
    }

    /// Patient-minus-therapist differences per dyad, in dyad order.
    pub fn dyad_differences(&self, channel: Channel) -> Result<Vec<f64>, AnalyticsError> {
        let speakers: Vec<Speaker> = self.turns.iter().map(|t| t.speaker).collect();
        pair_positions(&speakers)
            .into_iter()
            .map(|(p, t)| {
                let pv = self.turns[p].value(channel);
                let tv = self.turns[t].value(channel);
                match (pv, tv) {
                    (Some(a), Some(b)) => Ok(a - b),
                    _ => Err(AnalyticsError::MissingChannel(channel)),
                }
            })
            .collect()
    }
}

/// Join alliance series with optional per-session topic scores (same turn order
/// as the source sessions) and an optional principal-topic basis.
pub fn build_scored_sessions(
    series: &[AllianceSeries],
    topic_scores: Option<&[Vec<TurnTopicScore>]>,
    principal: Option<&PrincipalTopics>,
) -> Result<Vec<ScoredSession>, AnalyticsError> {
    if let Some(ts) = topic_scores {
        if ts.len() != series.len() {
            return Err(AnalyticsError::Misaligned(format!(
                "{} topic-score groups for {} sessions",
                ts.len(),
                series.len()
            )));
        }
    }
    series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let topics = topic_scores.map(|ts| &ts[i]);
            let turns = s
                .turns_in_order()
                .into_iter()
                .enumerate()
                .map(|(pos, t)| {
                    let topic_vec = match topics {
                        Some(ts) => {
                            let tt = ts
                                .get(pos)
                                .filter(|tt| tt.turn_index == t.turn_index && tt.session_id == s.session_id)
                                .ok_or_else(|| AnalyticsError::Misaligned(s.session_id.clone()))?;
                            Some(tt.scores.clone())
                        }
                        None => None,
                    };
                    let principal = match (&topic_vec, principal) {
                        (Some(v), Some(pt)) => Some(project_principal(v, pt)?),
                        _ => None,
                    };
                    Ok(ScoredTurn {
                        turn_index: t.turn_index,
                        speaker: t.speaker,
                        alliance: t.scales,
                        topics: topic_vec,
                        principal,
                    })
                })
                .collect::<Result<Vec<_>, AnalyticsError>>()?;
            Ok(ScoredSession {
                session_id: s.session_id.clone(),
                condition: s.condition,
                turns,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub condition: Condition,
    pub channel: String,
    /// `None` for patient–therapist discrepancy trajectories.
    pub role: Option<Speaker>,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Index-wise mean over the sessions that reach each index, truncated at the
/// last index with data.
fn index_means(per_session: &[Vec<f64>], max_index: usize) -> (Vec<f64>, Vec<usize>) {
    let len = per_session.iter().map(Vec::len).max().unwrap_or(0).min(max_index);
    let mut sums = vec![0f64; len];
    let mut counts = vec![0usize; len];
    for values in per_session {
        for (t, v) in values.iter().take(len).enumerate() {
            sums[t] += v;
            counts[t] += 1;
        }
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    (means, counts)
}

/// Mean of a role's channel at each of its first `max_index` turns across a
/// condition's sessions.
pub fn average_trajectory(
    sessions: &[ScoredSession],
    condition: Condition,
    role: Speaker,
    channel: Channel,
    max_index: usize,
) -> Result<Trajectory, AnalyticsError> {
    let per_session: Vec<Vec<f64>> = sessions
        .iter()
        .filter(|s| s.condition == condition)
        .map(|s| s.role_values(role, channel))
        .collect::<Result<_, _>>()?;
    if per_session.is_empty() {
        return Err(AnalyticsError::NoSessions(condition));
    }
    let (means, counts) = index_means(&per_session, max_index);
    Ok(Trajectory {
        condition,
        channel: channel.to_string(),
        role: Some(role),
        means,
        counts,
    })
}

/// Cumulative sum over dyads of the condition-mean patient-minus-therapist
/// difference.
pub fn discrepancy_cumsum(
    sessions: &[ScoredSession],
    condition: Condition,
    channel: Channel,
    max_index: usize,
) -> Result<Trajectory, AnalyticsError> {
    let in_condition: Vec<&ScoredSession> = sessions.iter().filter(|s| s.condition == condition).collect();
    if in_condition.is_empty() {
        return Err(AnalyticsError::NoSessions(condition));
    }
    let per_session: Vec<Vec<f64>> = in_condition
        .iter()
        .map(|s| s.dyad_differences(channel))
        .collect::<Result<_, _>>()?;
    if per_session.iter().all(Vec::is_empty) {
        return Err(AnalyticsError::NoDyads(condition));
    }
    let (means, counts) = index_means(&per_session, max_index);
    let mut acc = 0.0;
    let cumsum = means
        .into_iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect();
    Ok(Trajectory {
        condition,
        channel: channel.to_string(),
        role: None,
        means: cumsum,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleUnit {
    /// Every turn is one observation.
    #[default]
    Turn,
    /// Each session contributes the mean over its turns of the role.
    SessionMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub row: Condition,
    pub col: Condition,
    pub result: TTestResult,
}

/// Lower-triangular matrix of condition-pair tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub channel: String,
    pub role: Speaker,
    pub variant: TTestVariant,
    pub unit: SampleUnit,
    pub conditions: Vec<Condition>,
    /// Cells with `row` after `col` in condition order.
    pub cells: Vec<PairCell>,
}

impl PairwiseMatrix {
    pub fn get(&self, row: Condition, col: Condition) -> Option<&TTestResult> {
        self.cells
            .iter()
            .find(|c| c.row == row && c.col == col)
            .map(|c| &c.result)
    }

    /// Grid with a header row, `-` on the diagonal and blanks above it.
    pub fn grid(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::with_capacity(self.conditions.len() + 1);
        let mut header = vec![String::new()];
        header.extend(self.conditions.iter().map(|c| c.title().to_string()));
        rows.push(header);
        for (i, &r) in self.conditions.iter().enumerate() {
            let mut row = vec![r.title().to_string()];
            for (j, &c) in self.conditions.iter().enumerate() {
                row.push(match j.cmp(&i) {
                    std::cmp::Ordering::Less => self.get(r, c).map(|x| x.to_string()).unwrap_or_default(),
                    std::cmp::Ordering::Equal => "-".to_string(),
                    std::cmp::Ordering::Greater => String::new(),
                });
            }
            rows.push(row);
        }
        rows
    }

    /// Pipe-delimited text rendering of [`PairwiseMatrix::grid`].
    pub fn render(&self) -> String {
        let grid = self.grid();
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            out.push('|');
            for (cell, w) in row.iter().zip(&widths) {
                out.push_str(&format!(" {cell:<w$} |"));
            }
            out.push('\n');
        }
        out
    }
}

fn condition_samples(
    sessions: &[ScoredSession],
    condition: Condition,
    role: Speaker,
    channel: Channel,
    unit: SampleUnit,
) -> Result<Vec<f64>, AnalyticsError> {
    let mut out = Vec::new();
    for s in sessions.iter().filter(|s| s.condition == condition) {
        let v = s.role_values(role, channel)?;
        match unit {
            SampleUnit::Turn => out.extend(v),
            SampleUnit::SessionMean if !v.is_empty() => out.push(v.iter().sum::<f64>() / v.len() as f64),
            SampleUnit::SessionMean => {}
        }
    }
    Ok(out)
}

pub fn pairwise_condition_tests(
    sessions: &[ScoredSession],
    channel: Channel,
    role: Speaker,
    variant: TTestVariant,
    unit: SampleUnit,
) -> Result<PairwiseMatrix, AnalyticsError> {
    let mut samples = Vec::new();
    for c in Condition::ALL {
        let s = condition_samples(sessions, c, role, channel, unit)?;
        if !s.is_empty() {
            samples.push((c, s));
        }
    }
    if samples.len() < 2 {
        return Err(AnalyticsError::TooFewConditions(samples.len()));
    }
    let mut cells = Vec::new();
    for i in 0..samples.len() {
        for j in 0..i {
            cells.push(PairCell {
                row: samples[i].0,
                col: samples[j].0,
                result: t_test(&samples[i].1, &samples[j].1, variant)?,
            });
        }
    }
    Ok(PairwiseMatrix {
        channel: channel.to_string(),
        role,
        variant,
        unit,
        conditions: samples.iter().map(|(c, _)| *c).collect(),
        cells,
    })
}

/// Which per-turn vector ranks the therapist turns of a heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatmapAxis {
    Topics,
    Principal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub condition: Condition,
    pub topic: String,
    pub scale: Scale,
    pub mean: f64,
    pub n: usize,
}

/// For each condition and topic (or principal topic): rank the condition's
/// therapist turns by score, take the top `n`, and average the standardized
/// scales of the patient turn that immediately follows each of them.
pub fn topic_alliance_heatmap(
    sessions: &[ScoredSession],
    axis: HeatmapAxis,
    n: usize,
) -> Result<Vec<HeatmapCell>, AnalyticsError> {
    let dims = sessions
        .iter()
        .flat_map(|s| &s.turns)
        .find_map(|t| match axis {
            HeatmapAxis::Topics => t.topics.as_ref().map(Vec::len),
            HeatmapAxis::Principal => t.principal.as_ref().map(Vec::len),
        })
        .ok_or_else(|| AnalyticsError::NoQualifyingTurns("no topic scores attached".into()))?;
    let mut cells = Vec::new();
    for condition in Condition::ALL {
        let in_condition: Vec<&ScoredSession> = sessions.iter().filter(|s| s.condition == condition).collect();
        if in_condition.is_empty() {
            continue;
        }
        for k in 0..dims {
            let channel = match axis {
                HeatmapAxis::Topics => Channel::Topic(k),
                HeatmapAxis::Principal => Channel::Principal(k),
            };
            // (score, session_id, turn_index, following patient turn)
            let mut ranked: Vec<(f64, &str, usize, Option<&ScoredTurn>)> = Vec::new();
            for s in &in_condition {
                for (pos, t) in s.turns.iter().enumerate() {
                    if t.speaker != Speaker::Therapist {
                        continue;
                    }
                    let score = t.value(channel).ok_or(AnalyticsError::MissingChannel(channel))?;
                    let next = s.turns.get(pos + 1).filter(|nt| nt.speaker == Speaker::Patient);
                    ranked.push((score, &s.session_id, t.turn_index, next));
                }
            }
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
            ranked.truncate(n);
            let followers: Vec<&ScoredTurn> = ranked.iter().filter_map(|r| r.3).collect();
            if followers.is_empty() {
                continue;
            }
            for scale in Scale::ALL {
                let sum: f64 = followers.iter().map(|t| t.alliance.get(scale)).sum();
                cells.push(HeatmapCell {
                    condition,
                    topic: channel.to_string(),
                    scale,
                    mean: sum / followers.len() as f64,
                    n: followers.len(),
                });
            }
        }
    }
    if cells.is_empty() {
        return Err(AnalyticsError::NoQualifyingTurns(
            "no therapist turn is followed by a patient turn".into(),
        ));
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turn(i: usize, sp: Speaker, v: f64) -> ScoredTurn {
        ScoredTurn {
            turn_index: i,
            speaker: sp,
            alliance: ScaleScores {
                task: v,
                bond: 2.0 * v,
                goal: -v,
                full: 2.0 * v,
            },
            topics: Some(vec![v, -v]),
            principal: None,
        }
    }

    fn session(id: &str, c: Condition, vals: &[(Speaker, f64)]) -> ScoredSession {
        ScoredSession {
            session_id: id.into(),
            condition: c,
            turns: vals.iter().enumerate().map(|(i, &(sp, v))| turn(i, sp, v)).collect(),
        }
    }

    use Speaker::{Patient as P, Therapist as T};

    #[test]
    fn channel_labels_round_trip() {
        for c in [Channel::Task, Channel::Full, Channel::Topic(3), Channel::Principal(0)] {
            assert_eq!(c.to_string().parse::<Channel>().unwrap(), c);
        }
        assert_eq!(Channel::Principal(0).to_string(), "PT_1");
        assert!("topic_0".parse::<Channel>().is_err());
        assert!("mood".parse::<Channel>().is_err());
    }

    #[test]
    fn trajectory_single_session_and_lengths() {
        let a = session("a", Condition::Anxiety, &[(P, 1.0), (T, 0.0), (P, 2.0), (P, 3.0)]);
        let t = average_trajectory(std::slice::from_ref(&a), Condition::Anxiety, P, Channel::Task, 100).unwrap();
        assert_eq!(t.means, vec![1.0, 2.0, 3.0]);
        assert_eq!(t.counts, vec![1, 1, 1]);

        let b = session("b", Condition::Anxiety, &[(P, 1.0); 5]);
        let c = session("c", Condition::Anxiety, &[(P, 3.0); 3]);
        let t = average_trajectory(&[b, c], Condition::Anxiety, P, Channel::Task, 100).unwrap();
        assert_eq!(t.counts, vec![2, 2, 2, 1, 1]);
        assert_eq!(t.means, vec![2.0, 2.0, 2.0, 1.0, 1.0]);

        let err = average_trajectory(&[a], Condition::Depression, P, Channel::Task, 100).unwrap_err();
        assert!(matches!(err, AnalyticsError::NoSessions(Condition::Depression)));
    }

    #[test]
    fn trajectory_cap() {
        let long = session("a", Condition::Anxiety, &vec![(P, 0.5); 130]);
        let t = average_trajectory(&[long], Condition::Anxiety, P, Channel::Bond, 100).unwrap();
        assert_eq!(t.means.len(), 100);
        assert!(t.means.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn discrepancy_examples() {
        // dyads with patient-minus-therapist differences (1, -1, 2)
        let s = session(
            "a",
            Condition::Depression,
            &[(P, 1.0), (T, 0.0), (P, 0.0), (T, 1.0), (P, 2.5), (T, 0.5)],
        );
        let d = discrepancy_cumsum(std::slice::from_ref(&s), Condition::Depression, Channel::Task, 100).unwrap();
        assert_eq!(d.means, vec![1.0, 0.0, 2.0]);
        assert_eq!(d.role, None);

        let same = session("b", Condition::Anxiety, &[(P, 0.3), (T, 0.3), (P, -1.0), (T, -1.0)]);
        let d = discrepancy_cumsum(&[same], Condition::Anxiety, Channel::Goal, 100).unwrap();
        assert_eq!(d.means, vec![0.0, 0.0]);

        let no_dyads = session("c", Condition::Anxiety, &[(T, 0.3), (P, 0.3)]);
        assert!(matches!(
            discrepancy_cumsum(&[no_dyads], Condition::Anxiety, Channel::Goal, 100),
            Err(AnalyticsError::NoDyads(_))
        ));
    }

    #[test]
    fn missing_channel_is_reported() {
        let s = session("a", Condition::Anxiety, &[(P, 1.0), (T, 0.0)]);
        assert!(matches!(
            average_trajectory(&[s], Condition::Anxiety, P, Channel::Principal(0), 100),
            Err(AnalyticsError::MissingChannel(Channel::Principal(0)))
        ));
    }

    #[test]
    fn pairwise_identical_conditions() {
        let a = session("a", Condition::Anxiety, &[(P, 1.0), (T, 2.0), (P, 3.0), (T, 0.0)]);
        let b = session("b", Condition::Suicidality, &[(P, 3.0), (T, 2.0), (P, 1.0), (T, 5.0)]);
        let m = pairwise_condition_tests(&[a, b], Channel::Task, P, TTestVariant::Student, SampleUnit::Turn).unwrap();
        assert_eq!(m.conditions, vec![Condition::Anxiety, Condition::Suicidality]);
        let r = m.get(Condition::Suicidality, Condition::Anxiety).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.stars, "ns");
        let g = m.grid();
        assert_eq!(g[0], vec!["", "Anxiety", "Suicidality"]);
        assert_eq!(g[1], vec!["Anxiety", "-", ""]);
        assert_eq!(g[2][1], "ns (1.000e+00)");
    }

    #[test]
    fn pairwise_needs_two_conditions() {
        let a = session("a", Condition::Anxiety, &[(P, 1.0), (P, 2.0)]);
        assert!(matches!(
            pairwise_condition_tests(&[a], Channel::Task, P, TTestVariant::Student, SampleUnit::Turn),
            Err(AnalyticsError::TooFewConditions(1))
        ));
    }

    #[test]
    fn heatmap_constant_patients_and_session_end() {
        // therapist turn at the end of "b" has no follower
        let a = session("a", Condition::Anxiety, &[(T, 0.9), (P, 0.5), (T, 0.1), (P, 0.5)]);
        let b = session("b", Condition::Anxiety, &[(P, 0.5), (T, 5.0)]);
        let cells = topic_alliance_heatmap(&[a, b], HeatmapAxis::Topics, 100).unwrap();
        // 2 topics × 3 scales for anxiety
        assert_eq!(cells.len(), 6);
        for c in &cells {
            assert_eq!(c.n, 2);
            let expected = match c.scale {
                Scale::Task => 0.5,
                Scale::Bond => 1.0,
                Scale::Goal => -0.5,
            };
            assert_eq!(c.mean, expected);
        }
    }
}
