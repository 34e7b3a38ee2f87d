use serde::{Deserialize, Serialize};

use crate::corpus::{Condition, Speaker};

use super::TurnTopicScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTurn {
    pub session_id: String,
    pub condition: Condition,
    pub turn_index: usize,
    pub score: f64,
}

/// Turns of one speaker role ranked by their score on dimension `k`.
///
/// Sorted by score descending, ties by session id then turn index ascending,
/// truncated to `n`.
pub fn top_turns(
    scores: &[TurnTopicScore],
    speaker: Speaker,
    k: usize,
    n: usize,
    condition: Option<Condition>,
) -> Vec<RankedTurn> {
    let mut ranked: Vec<RankedTurn> = scores
        .iter()
        .filter(|s| s.speaker == speaker && condition.is_none_or(|c| s.condition == c))
        .filter_map(|s| {
            s.scores.get(k).map(|&score| RankedTurn {
                session_id: s.session_id.clone(),
                condition: s.condition,
                turn_index: s.turn_index,
                score,
            })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.session_id.cmp(&b.session_id))
            .then(a.turn_index.cmp(&b.turn_index))
    });
    ranked.truncate(n);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(session: &str, idx: usize, speaker: Speaker, c: Condition, s: f64) -> TurnTopicScore {
        TurnTopicScore {
            session_id: session.into(),
            condition: c,
            turn_index: idx,
            speaker,
            scores: vec![0.0, s],
        }
    }

    #[test]
    fn hand_sorted_fixture() {
        use Condition::*;
        use Speaker::*;
        let data = vec![
            ts("b", 1, Therapist, Anxiety, 0.3),
            ts("a", 3, Therapist, Depression, 0.9),
            ts("a", 1, Therapist, Anxiety, 0.3),
            ts("c", 0, Therapist, Anxiety, -0.2),
            ts("a", 0, Patient, Anxiety, 5.0),
            ts("a", 5, Therapist, Anxiety, 0.3),
        ];
        let order: Vec<(String, usize)> = top_turns(&data, Therapist, 1, 100, None)
            .into_iter()
            .map(|r| (r.session_id, r.turn_index))
            .collect();
        assert_eq!(
            order,
            vec![
                ("a".into(), 3),
                ("a".into(), 1),
                ("a".into(), 5),
                ("b".into(), 1),
                ("c".into(), 0)
            ]
        );
        let top2 = top_turns(&data, Therapist, 1, 2, None);
        assert_eq!(top2.len(), 2);
        let anx = top_turns(&data, Therapist, 1, 100, Some(Anxiety));
        assert_eq!(anx.len(), 4);
        assert_eq!(anx[0].session_id, "a");
        assert_eq!(anx[0].turn_index, 1);
    }
}
