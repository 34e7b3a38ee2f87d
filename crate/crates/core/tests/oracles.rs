mod common;

use std::collections::BTreeMap;

use alliance_core::analytics::stats::{student_t_cdf, two_sided_p};
use alliance_core::analytics::{
    build_scored_sessions, discrepancy_cumsum, pairwise_condition_tests, t_test, topic_alliance_heatmap, HeatmapAxis,
    SampleUnit, ScoredSession, ScoredTurn, TTestVariant,
};
use alliance_core::embedding::embed_baseline;
use alliance_core::inventory::{aggregate_scales, Scale};
use alliance_core::topics::baseline::{learn_baseline_topics, BaselineTopicConfig};
use alliance_core::topics::{principal_topics, score_corpus_topics, DEFAULT_COMPONENTS};
use alliance_core::{
    default_inventory, demo_corpus, score_corpus, standardize, AllianceScorer, CachedEmbedder, Channel, Condition,
    DemoConfig, EmbeddingBackend, ScaleScores, Session, Speaker, Turn,
};
use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::*;

#[test]
fn baseline_embedding_matches_reference_bits() {
    let v = embed_baseline("hello world", 8, 0).unwrap();
    let bits: Vec<u32> = v.as_slice().iter().map(|x| x.to_bits()).collect();
    assert_eq!(bits, HELLO_WORLD_8_SALT0);
    let v = embed_baseline("I feel fine.", 8, 42).unwrap();
    let bits: Vec<u32> = v.as_slice().iter().map(|x| x.to_bits()).collect();
    assert_eq!(bits, I_FEEL_FINE_8_SALT42);
}

#[test]
fn baseline_embedding_is_normalized_token_mean() {
    let a = oracle_token_vector("hello", 8, 0);
    let b = oracle_token_vector("world", 8, 0);
    let mean: Vec<f32> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
    let norm = mean.iter().fold(0f32, |s, x| s + x * x).sqrt();
    let expected: Vec<f32> = mean.iter().map(|x| x / norm).collect();
    assert_eq!(
        embed_baseline("Hello, WORLD", 8, 0).unwrap().as_slice(),
        expected.as_slice()
    );
}

#[test]
fn inventory_matches_transcription_and_one_hot_oracle() {
    let inv = default_inventory();
    assert_eq!(inv.items.len(), 36);
    for (j, item) in inv.items.iter().enumerate() {
        let letter = match item.scale {
            Scale::Task => b'T',
            Scale::Bond => b'B',
            Scale::Goal => b'G',
        };
        assert_eq!(letter, SCALES.as_bytes()[j], "item {}", j + 1);
        assert_eq!(f64::from(item.sign), sign_of(j), "item {}", j + 1);
        let mut one_hot = vec![0.0; 36];
        one_hot[j] = 1.0;
        let s = aggregate_scales(&one_hot, &inv.key).unwrap();
        let b = brute_force_scales(&one_hot);
        assert_eq!([s.task, s.bond, s.goal], b);
        assert_eq!(s.full, sign_of(j));
    }
}

#[test]
fn waa_matches_brute_force() {
    let (store, turns) = orthonormal_fixture(20, 99);
    let embedder = store_embedder(store);
    let inv = default_inventory();
    let scorer = AllianceScorer::new(&inv, &embedder).unwrap();
    for (i, (text, v)) in turns.iter().enumerate() {
        let speaker = if i % 2 == 0 {
            Speaker::Patient
        } else {
            Speaker::Therapist
        };
        let turn = Turn {
            index: i,
            speaker,
            text: text.clone(),
        };
        let got = scorer.score_turn("waa", &turn).unwrap();
        let sim: Vec<f64> = (0..36)
            .map(|j| {
                let mut e = vec![0f32; WAA_DIM];
                e[j] = 1.0;
                brute_force_cosine(v, &e)
            })
            .collect();
        for (g, e) in got.sim36.iter().zip(&sim) {
            assert_abs_diff_eq!(*g, *e, epsilon = 1e-9);
        }
        let [task, bond, goal] = brute_force_scales(&sim);
        assert_abs_diff_eq!(got.scales.task, task, epsilon = 1e-9);
        assert_abs_diff_eq!(got.scales.bond, bond, epsilon = 1e-9);
        assert_abs_diff_eq!(got.scales.goal, goal, epsilon = 1e-9);
    }
}

#[test]
fn t_cdf_matches_numerical_integration() {
    for (t, df) in t_grid() {
        let oracle = t_cdf_by_integration(t, df);
        let got = student_t_cdf(t, df);
        assert!((got - oracle).abs() <= 1e-9, "t={t} df={df}: {got} vs {oracle}");
        let p = two_sided_p(t, df);
        assert!((p - 2.0 * (1.0 - student_t_cdf(t.abs(), df))).abs() <= 1e-9);
    }
}

#[test]
fn t_cdf_agrees_with_statrs() {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    for (t, df) in t_grid() {
        let d = StudentsT::new(0.0, 1.0, df).unwrap();
        assert!((student_t_cdf(t, df) - d.cdf(t)).abs() <= 1e-9);
    }
}

#[test]
fn separated_conditions_are_highly_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let a: Vec<f64> = (0..200).map(|_| 1.0 + noise.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..200).map(|_| -1.0 + noise.sample(&mut rng)).collect();
    let r = t_test(&a, &b, TTestVariant::Student).unwrap();
    assert!(r.p < 1e-4);
    assert_eq!(r.stars, "****");
    let swapped = t_test(&b, &a, TTestVariant::Student).unwrap();
    assert_eq!(swapped.t, -r.t);
    assert_eq!(swapped.p, r.p);
}

#[test]
fn pca_recovers_correlated_axis() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x = Normal::new(0.0, 1.0).unwrap();
    let sigma = 0.3;
    let noise = Normal::new(0.0, sigma).unwrap();
    let samples: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let v = x.sample(&mut rng);
            vec![v, v + noise.sample(&mut rng)]
        })
        .collect();
    let pt = principal_topics(&samples, 2).unwrap();
    // generating covariance [[1, 1], [1, 1 + σ²]]: leading eigenvector in closed form
    let (a, b, c) = (1.0, 1.0, 1.0 + sigma * sigma);
    let lambda = 0.5 * (a + c) + ((0.5 * (a - c)).powi(2) + b * b).sqrt();
    let axis = [b, lambda - a];
    let n = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
    let first = &pt.components[0];
    let cos = (first[0] * axis[0] + first[1] * axis[1]) / n;
    assert!(cos >= 0.99, "cosine {cos}");
    let diag = std::f64::consts::FRAC_1_SQRT_2;
    assert!(first[0] * diag + first[1] * diag >= 0.99);
    for i in 0..2 {
        for j in 0..2 {
            let d: f64 = pt.components[i].iter().zip(&pt.components[j]).map(|(p, q)| p * q).sum();
            assert!((d - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-6);
        }
    }
}

fn session(id: &str, condition: Condition, texts: &[&str]) -> Session {
    Session {
        session_id: id.into(),
        condition,
        turns: texts
            .iter()
            .enumerate()
            .map(|(i, t)| Turn {
                index: i,
                speaker: if i % 2 == 0 {
                    Speaker::Patient
                } else {
                    Speaker::Therapist
                },
                text: t.to_string(),
            })
            .collect(),
    }
}

#[test]
fn baseline_topics_separate_disjoint_vocabularies() {
    let corpus = vec![
        session(
            "a",
            Condition::Anxiety,
            &["apple banana cherry", "banana cherry date", "apple date"],
        ),
        session(
            "b",
            Condition::Depression,
            &["xenon yttrium zinc", "yttrium zinc xenon wolfram", "wolfram zinc"],
        ),
    ];
    let model = learn_baseline_topics(
        &corpus,
        &BaselineTopicConfig {
            k: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let fruit = ["apple", "banana", "cherry", "date"];
    let mut blocks = Vec::new();
    for t in 0..2 {
        let words = model.top_words(t, 4);
        assert!(!words.is_empty());
        let in_fruit = words.iter().filter(|w| fruit.contains(w)).count();
        assert!(in_fruit == 0 || in_fruit == words.len(), "topic {t}: {words:?}");
        blocks.push(in_fruit > 0);
    }
    assert_ne!(blocks[0], blocks[1]);
}

fn random_sessions(seed: u64) -> Vec<ScoredSession> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::new();
    for (ci, c) in Condition::ALL.iter().enumerate() {
        for s in 0..3 {
            let len = 6 + (s * 5 + ci) % 9;
            let turns = (0..len)
                .map(|i| ScoredTurn {
                    turn_index: i,
                    speaker: if (i + s) % 3 == 2 || i % 2 == 1 {
                        Speaker::Therapist
                    } else {
                        Speaker::Patient
                    },
                    alliance: ScaleScores {
                        task: n.sample(&mut rng),
                        bond: n.sample(&mut rng),
                        goal: n.sample(&mut rng),
                        full: n.sample(&mut rng),
                    },
                    topics: Some((0..3).map(|_| n.sample(&mut rng)).collect()),
                    principal: None,
                })
                .collect();
            out.push(ScoredSession {
                session_id: format!("{}-{s}", c.as_str()),
                condition: *c,
                turns,
            });
        }
    }
    out
}

#[test]
fn discrepancy_is_linear_and_shift_invariant() {
    let base = random_sessions(5);
    let transform = |f: &dyn Fn(f64) -> f64| -> Vec<ScoredSession> {
        base.iter()
            .cloned()
            .map(|mut s| {
                for t in &mut s.turns {
                    t.alliance.task = f(t.alliance.task);
                }
                s
            })
            .collect()
    };
    for c in Condition::ALL {
        let d = discrepancy_cumsum(&base, c, Channel::Task, 100).unwrap();
        let scaled = discrepancy_cumsum(&transform(&|x| 2.5 * x), c, Channel::Task, 100).unwrap();
        let shifted = discrepancy_cumsum(&transform(&|x| x + 3.0), c, Channel::Task, 100).unwrap();
        for i in 0..d.means.len() {
            assert!((scaled.means[i] - 2.5 * d.means[i]).abs() < 1e-12);
            assert!((shifted.means[i] - d.means[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn pairwise_matrix_is_antisymmetric_in_t() {
    let sessions = random_sessions(8);
    let m = pairwise_condition_tests(
        &sessions,
        Channel::Bond,
        Speaker::Patient,
        TTestVariant::Welch,
        SampleUnit::Turn,
    )
    .unwrap();
    assert_eq!(m.cells.len(), 6);
    for cell in &m.cells {
        let pick = |c: Condition| -> Vec<f64> {
            sessions
                .iter()
                .filter(|s| s.condition == c)
                .flat_map(|s| {
                    s.turns
                        .iter()
                        .filter(|t| t.speaker == Speaker::Patient)
                        .map(|t| t.alliance.bond)
                })
                .collect()
        };
        let forward = t_test(&pick(cell.row), &pick(cell.col), TTestVariant::Welch).unwrap();
        let back = t_test(&pick(cell.col), &pick(cell.row), TTestVariant::Welch).unwrap();
        assert_eq!(forward, cell.result);
        assert_eq!(back.t, -forward.t);
        assert_eq!(back.p, forward.p);
    }
}

#[test]
fn heatmap_matches_enumeration() {
    let sessions = random_sessions(11);
    let n = 4;
    let cells = topic_alliance_heatmap(&sessions, HeatmapAxis::Topics, n).unwrap();
    let mut expected: BTreeMap<(usize, usize), (usize, [f64; 3])> = BTreeMap::new();
    for (ci, c) in Condition::ALL.iter().enumerate() {
        for k in 0..3 {
            let mut all = Vec::new();
            for s in sessions.iter().filter(|s| s.condition == *c) {
                for (p, t) in s.turns.iter().enumerate() {
                    if t.speaker == Speaker::Therapist {
                        all.push((
                            t.topics.as_ref().unwrap()[k],
                            s.session_id.clone(),
                            t.turn_index,
                            s.turns.get(p + 1).cloned(),
                        ));
                    }
                }
            }
            // rank = number of turns strictly ahead in (score desc, id asc, index asc)
            let ahead = |a: &(f64, String, usize, Option<ScoredTurn>)| {
                all.iter()
                    .filter(|b| b.0 > a.0 || (b.0 == a.0 && (b.1.clone(), b.2) < (a.1.clone(), a.2)))
                    .count()
            };
            let chosen: Vec<&ScoredTurn> = all
                .iter()
                .filter(|a| ahead(a) < n)
                .filter_map(|a| a.3.as_ref().filter(|t| t.speaker == Speaker::Patient))
                .collect();
            if chosen.is_empty() {
                continue;
            }
            let m = chosen.len() as f64;
            expected.insert(
                (ci, k),
                (
                    chosen.len(),
                    [
                        chosen.iter().map(|t| t.alliance.task).sum::<f64>() / m,
                        chosen.iter().map(|t| t.alliance.bond).sum::<f64>() / m,
                        chosen.iter().map(|t| t.alliance.goal).sum::<f64>() / m,
                    ],
                ),
            );
        }
    }
    assert_eq!(cells.len(), 3 * expected.len());
    for cell in &cells {
        let k: usize = cell.topic.trim_start_matches("topic_").parse::<usize>().unwrap() - 1;
        let (count, means) = expected[&(cell.condition.index(), k)];
        assert_eq!(cell.n, count);
        let slot = match cell.scale {
            Scale::Task => 0,
            Scale::Bond => 1,
            Scale::Goal => 2,
        };
        assert!((cell.mean - means[slot]).abs() < 1e-12);
    }
}

#[test]
fn demo_standardization_is_exact() {
    let corpus = demo_corpus(&DemoConfig::default());
    let embedder = CachedEmbedder::new(EmbeddingBackend::baseline(64, 0).unwrap());
    let raw = score_corpus(&corpus, &default_inventory(), &embedder).unwrap();
    let z = standardize(&raw).unwrap();
    for role in Speaker::BOTH {
        for channel in Channel::SCALES {
            let values: Vec<f64> = z
                .iter()
                .flat_map(|s| s.role(role).iter())
                .map(|t| match channel {
                    Channel::Task => t.scales.task,
                    Channel::Bond => t.scales.bond,
                    Channel::Goal => t.scales.goal,
                    _ => t.scales.full,
                })
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() <= 1e-9, "{role:?} {channel}: mean {mean}");
            assert!((sd - 1.0).abs() <= 1e-9, "{role:?} {channel}: sd {sd}");
        }
    }
}

#[test]
fn demo_pipeline_principal_topics_are_consistent() {
    let corpus = demo_corpus(&DemoConfig::default());
    let embedder = CachedEmbedder::new(EmbeddingBackend::baseline(64, 0).unwrap());
    let z = standardize(&score_corpus(&corpus, &default_inventory(), &embedder).unwrap()).unwrap();
    let model = learn_baseline_topics(&corpus, &BaselineTopicConfig::default()).unwrap();
    let vectors = alliance_core::topics::derive_topic_vectors(&model, &embedder, 25).unwrap();
    let topic_scores = score_corpus_topics(&corpus, &vectors, &embedder).unwrap();
    let samples: Vec<Vec<f64>> = topic_scores.iter().flatten().map(|t| t.scores.clone()).collect();
    let pt = principal_topics(&samples, DEFAULT_COMPONENTS).unwrap();
    let sessions = build_scored_sessions(&z, Some(&topic_scores), Some(&pt)).unwrap();
    // PT_1 discrepancy equals the same computation on hand-projected coordinates
    for c in Condition::ALL {
        let d = discrepancy_cumsum(&sessions, c, Channel::Principal(0), 100).unwrap();
        assert_eq!(d.channel, "PT_1");
        assert!(d.means.iter().all(|m| m.is_finite()));
    }
    let cells = topic_alliance_heatmap(&sessions, HeatmapAxis::Principal, 100).unwrap();
    assert_eq!(cells.len(), 4 * 3 * 3);
}
