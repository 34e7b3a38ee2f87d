use std::collections::{BTreeSet, HashMap};

use alliance_core::alliance::records;
use alliance_core::analytics::{
    average_trajectory, discrepancy_cumsum, pairwise_condition_tests, topic_alliance_heatmap, HeatmapAxis, SampleUnit,
    TTestVariant, DEFAULT_MAX_INDEX,
};
use alliance_core::classifier::{
    build_features, evaluate, stratified_split, train, Evaluation, FeatureMode, FeatureOptions, RoleMode,
};
use alliance_core::corpus::{corpus_stats, write_corpus};
use alliance_core::embedding::tokenize;
use alliance_core::topiceval::{coherence, topic_diversity, CoherenceReport, Diversity, DEFAULT_EPSILON};
use alliance_core::topics::{
    export_prompts as render_prompt, project_principal, top_turns, PromptTemplate, RankedTurn, TopicSelection,
    TurnTopicScore,
};
use alliance_core::{
    demo_corpus, CachedEmbedder, Channel, ClassifierConfig, CoherenceMetric, Condition, DemoConfig, EmbeddingBackend,
    EncoderKind, FeatureSequence, Scale, Speaker, TrainedModel,
};
use serde::Serialize;

use crate::context::{self, Inputs, Scored, TopicRun};
use crate::output::{header, num, Output};
use crate::{
    llm, ClassifyArgs, DemoArgs, HeatmapArgs, PromptArgs, ScoreArgs, TestsArgs, TopicArgs, TopicEvalArgs, TopicsArgs,
    TrajectoryArgs,
};

type Result<T> = anyhow::Result<T>;

fn present_conditions(inputs: &Inputs) -> Vec<Condition> {
    let present: BTreeSet<Condition> = inputs.corpus.iter().map(|s| s.condition).collect();
    present.into_iter().collect()
}

pub fn score(a: &ScoreArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let scored = context::score(&inputs)?;
    score_step(&inputs, &scored, &mut out)?;
    inputs.save_cache()?;
    out.finish("score", a, None)
}

fn score_step(inputs: &Inputs, scored: &Scored, out: &mut Output) -> Result<()> {
    let raw = records(&scored.raw);
    let z = records(&scored.z);
    out.jsonl("scores.jsonl", &raw)?;
    out.jsonl("scores_standardized.jsonl", &z)?;
    let mut cols = header(&[
        "session_id",
        "condition",
        "turn_index",
        "speaker",
        "task",
        "bond",
        "goal",
        "full",
        "z_task",
        "z_bond",
        "z_goal",
        "z_full",
    ]);
    cols.extend((1..=36).map(|j| format!("sim_{j:02}")));
    let rows: Vec<Vec<String>> = raw
        .iter()
        .zip(&z)
        .map(|(r, s)| {
            let mut row = vec![
                r.session_id.clone(),
                r.condition.to_string(),
                r.turn_index.to_string(),
                r.speaker.to_string(),
            ];
            row.extend([r.task, r.bond, r.goal, r.full, s.task, s.bond, s.goal, s.full].map(num));
            row.extend(r.sim36.iter().map(|&x| num(x)));
            row
        })
        .collect();
    out.csv("scores.csv", &cols, &rows)?;
    out.json("corpus_stats.json", &corpus_stats(&inputs.corpus))
}

pub fn trajectories(a: &TrajectoryArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let scored = context::score(&inputs)?;
    let run = if a.with_topics {
        Some(context::topics(&inputs, &a.topic, &mut out)?)
    } else {
        None
    };
    trajectories_step(&inputs, &scored, run.as_ref(), a.max_index, &mut out)?;
    inputs.save_cache()?;
    out.finish("trajectories", a, None)
}

fn channels(run: Option<&TopicRun>) -> Vec<Channel> {
    let mut out: Vec<Channel> = Channel::SCALES.to_vec();
    if let Some(run) = run {
        out.extend((0..run.model.k).map(Channel::Topic));
        out.extend((0..run.principal.components.len()).map(Channel::Principal));
    }
    out
}

fn trajectory_rows(trajectories: &[alliance_core::Trajectory]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for t in trajectories {
        let role = t
            .role
            .map_or_else(|| "patient-therapist".to_string(), |r| r.to_string());
        for (i, (m, c)) in t.means.iter().zip(&t.counts).enumerate() {
            rows.push(vec![
                t.condition.to_string(),
                t.channel.clone(),
                role.clone(),
                (i + 1).to_string(),
                num(*m),
                c.to_string(),
            ]);
        }
    }
    rows
}

fn trajectories_step(
    inputs: &Inputs,
    scored: &Scored,
    run: Option<&TopicRun>,
    max_index: usize,
    out: &mut Output,
) -> Result<()> {
    let sessions = context::sessions(&scored.z, run)?;
    let conditions = present_conditions(inputs);
    let chans = channels(run);
    let mut averages = Vec::new();
    let mut discrepancies = Vec::new();
    for &c in &conditions {
        for &ch in &chans {
            for role in Speaker::BOTH {
                averages.push(average_trajectory(&sessions, c, role, ch, max_index)?);
            }
            discrepancies.push(discrepancy_cumsum(&sessions, c, ch, max_index)?);
        }
    }
    let cols = header(&["condition", "channel", "role", "index", "value", "n"]);
    out.csv("trajectories.csv", &cols, &trajectory_rows(&averages))?;
    out.json("trajectories.json", &averages)?;
    out.csv("discrepancy.csv", &cols, &trajectory_rows(&discrepancies))?;
    out.json("discrepancy.json", &discrepancies)
}

pub fn topics(a: &TopicsArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let run = context::topics(&inputs, &a.topic, &mut out)?;
    topics_step(&inputs, &run, a.top_n, &mut out)?;
    inputs.save_cache()?;
    out.finish("topics", a, Some(a.topic.topic_seed))
}

/// Per-turn principal coordinates in the shape of topic scores.
fn principal_scores(run: &TopicRun) -> Result<Vec<TurnTopicScore>> {
    run.scores
        .iter()
        .flatten()
        .map(|t| {
            Ok(TurnTopicScore {
                scores: project_principal(&t.scores, &run.principal)?,
                ..t.clone()
            })
        })
        .collect()
}

fn text_index(inputs: &Inputs) -> HashMap<(&str, usize), &str> {
    inputs
        .corpus
        .iter()
        .flat_map(|s| {
            s.turns
                .iter()
                .map(move |t| ((s.session_id.as_str(), t.index), t.text.as_str()))
        })
        .collect()
}

#[derive(Serialize)]
struct TopicScoreRow<'a> {
    session_id: &'a str,
    condition: Condition,
    turn_index: usize,
    speaker: Speaker,
    topics: &'a [f64],
    principal: &'a [f64],
}

fn topics_step(inputs: &Inputs, run: &TopicRun, top_n: usize, out: &mut Output) -> Result<()> {
    out.text("topic_model.json", &(run.model.to_json() + "\n"))?;
    out.json("principal_topics.json", &run.principal)?;
    let flat: Vec<TurnTopicScore> = run.scores.iter().flatten().cloned().collect();
    let principal = principal_scores(run)?;
    let rows: Vec<TopicScoreRow> = flat
        .iter()
        .zip(&principal)
        .map(|(t, p)| TopicScoreRow {
            session_id: &t.session_id,
            condition: t.condition,
            turn_index: t.turn_index,
            speaker: t.speaker,
            topics: &t.scores,
            principal: &p.scores,
        })
        .collect();
    out.jsonl("topic_scores.jsonl", &rows)?;
    let mut cols = header(&["session_id", "condition", "turn_index", "speaker"]);
    cols.extend((1..=run.model.k).map(|k| format!("topic_{k}")));
    cols.extend((1..=run.principal.components.len()).map(|m| format!("PT_{m}")));
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.session_id.to_string(),
                r.condition.to_string(),
                r.turn_index.to_string(),
                r.speaker.to_string(),
            ];
            row.extend(r.topics.iter().chain(r.principal).map(|&x| num(x)));
            row
        })
        .collect();
    out.csv("topic_scores.csv", &cols, &csv_rows)?;

    let texts = text_index(inputs);
    let mut top_rows = Vec::new();
    for (source, dims) in [(&flat, run.model.k), (&principal, run.principal.components.len())] {
        for role in Speaker::BOTH {
            for k in 0..dims {
                let label = if std::ptr::eq(source, &flat) {
                    Channel::Topic(k)
                } else {
                    Channel::Principal(k)
                };
                for (rank, r) in top_turns(source, role, k, top_n, None).iter().enumerate() {
                    top_rows.push(vec![
                        label.to_string(),
                        role.to_string(),
                        (rank + 1).to_string(),
                        r.session_id.clone(),
                        r.condition.to_string(),
                        r.turn_index.to_string(),
                        num(r.score),
                        texts
                            .get(&(r.session_id.as_str(), r.turn_index))
                            .copied()
                            .unwrap_or("")
                            .to_string(),
                    ]);
                }
            }
        }
    }
    let cols = header(&[
        "dimension",
        "role",
        "rank",
        "session_id",
        "condition",
        "turn_index",
        "score",
        "text",
    ]);
    out.csv("top_turns.csv", &cols, &top_rows)
}

pub fn topic_eval(a: &TopicEvalArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let model = context::topic_model(&inputs, &a.topic, &mut out)?;
    topic_eval_step(&inputs, &model, a.topic.top_k, &mut out)?;
    inputs.save_cache()?;
    out.finish("topic-eval", a, Some(a.topic.topic_seed))
}

#[derive(Serialize)]
struct ScopedReport {
    scope: String,
    report: CoherenceReport,
}

#[derive(Serialize)]
struct TopicEvalSummary {
    top_k: usize,
    epsilon: f64,
    diversity: Diversity,
    coherence: Vec<ScopedReport>,
}

fn topic_eval_step(inputs: &Inputs, model: &alliance_core::TopicModel, top_k: usize, out: &mut Output) -> Result<()> {
    let mut scopes: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    let documents = |c: Option<Condition>| -> Vec<Vec<String>> {
        inputs
            .corpus
            .iter()
            .filter(|s| c.is_none_or(|c| s.condition == c))
            .flat_map(|s| s.turns.iter().map(|t| tokenize(&t.text)))
            .filter(|d| !d.is_empty())
            .collect()
    };
    scopes.push(("all".into(), documents(None)));
    for c in present_conditions(inputs) {
        scopes.push((c.to_string(), documents(Some(c))));
    }
    let mut reports = Vec::new();
    for (scope, docs) in &scopes {
        for metric in CoherenceMetric::ALL {
            let report = coherence(model, docs, metric, top_k, DEFAULT_EPSILON, Some(&inputs.embedder))?;
            reports.push(ScopedReport {
                scope: scope.clone(),
                report,
            });
        }
    }
    let diversity = topic_diversity(model, top_k);
    let mut rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let per_topic: Vec<String> = r.report.per_topic.iter().map(|&x| num(x)).collect();
            vec![
                r.scope.clone(),
                r.report.metric.as_str().to_string(),
                num(r.report.mean),
                r.report.skipped_pairs.to_string(),
                per_topic.join(";"),
            ]
        })
        .collect();
    rows.push(vec![
        "all".into(),
        "puw".into(),
        num(diversity.value),
        "0".into(),
        String::new(),
    ]);
    let cols = header(&["scope", "metric", "mean", "skipped_pairs", "per_topic"]);
    out.csv("topic_eval.csv", &cols, &rows)?;
    out.json(
        "topic_eval.json",
        &TopicEvalSummary {
            top_k,
            epsilon: DEFAULT_EPSILON,
            diversity,
            coherence: reports,
        },
    )
}

pub fn heatmap(a: &HeatmapArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let scored = context::score(&inputs)?;
    let run = context::topics(&inputs, &a.topic, &mut out)?;
    heatmap_step(&scored, &run, a.axis.into(), a.n, &mut out)?;
    inputs.save_cache()?;
    out.finish("heatmap", a, Some(a.topic.topic_seed))
}

fn heatmap_step(scored: &Scored, run: &TopicRun, axis: HeatmapAxis, n: usize, out: &mut Output) -> Result<()> {
    let sessions = context::sessions(&scored.z, Some(run))?;
    let cells = topic_alliance_heatmap(&sessions, axis, n)?;
    let name = match axis {
        HeatmapAxis::Topics => "heatmap_topics",
        HeatmapAxis::Principal => "heatmap_principal",
    };
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.condition.to_string(),
                c.topic.clone(),
                c.scale.as_str().to_string(),
                num(c.mean),
                c.n.to_string(),
            ]
        })
        .collect();
    out.csv(
        &format!("{name}.csv"),
        &header(&["condition", "topic", "scale", "mean", "n"]),
        &rows,
    )?;
    out.json(&format!("{name}.json"), &cells)
}

pub fn tests(a: &TestsArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let scored = context::score(&inputs)?;
    let run = match a.scale {
        Channel::Topic(_) | Channel::Principal(_) => Some(context::topics(&inputs, &a.topic, &mut out)?),
        _ => None,
    };
    let rendered = tests_step(
        &scored,
        run.as_ref(),
        a.scale,
        a.role.into(),
        a.variant.into(),
        a.unit.into(),
        &mut out,
    )?;
    print!("{rendered}");
    inputs.save_cache()?;
    out.finish("tests", a, None)
}

fn tests_step(
    scored: &Scored,
    run: Option<&TopicRun>,
    channel: Channel,
    role: Speaker,
    variant: TTestVariant,
    unit: SampleUnit,
    out: &mut Output,
) -> Result<String> {
    let sessions = context::sessions(&scored.z, run)?;
    let matrix = pairwise_condition_tests(&sessions, channel, role, variant, unit)?;
    let grid = matrix.grid();
    let name = format!("tests_{channel}_{role}");
    if let Some((head, rows)) = grid.split_first() {
        out.csv(&format!("{name}.csv"), head, rows)?;
    }
    out.json(&format!("{name}.json"), &matrix)?;
    Ok(format!(
        "{channel} ({role}, {variant:?}, {unit:?})\n{}",
        matrix.render()
    ))
}

struct ClassifyPlan {
    config: ClassifierConfig,
    options: FeatureOptions,
    test_fraction: f64,
}

fn feature_set(inputs: &Inputs, scored: &Scored, options: &FeatureOptions) -> Result<Vec<FeatureSequence>> {
    let embedder: Option<&CachedEmbedder> = options.feature_mode.uses_embedding().then_some(&inputs.embedder);
    inputs
        .corpus
        .iter()
        .zip(&scored.raw)
        .map(|(s, series)| Ok(build_features(s, series, embedder, options)?))
        .collect()
}

fn split(data: &[FeatureSequence], plan: &ClassifyPlan) -> (Vec<FeatureSequence>, Vec<FeatureSequence>) {
    let labels: Vec<Condition> = data.iter().map(|s| s.label).collect();
    let (train_idx, test_idx) = stratified_split(&labels, plan.test_fraction, plan.config.seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    (pick(&train_idx), pick(&test_idx))
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    config: &'a ClassifierConfig,
    features: &'a FeatureOptions,
    feature_dim: usize,
    train_sessions: Vec<&'a str>,
    test_sessions: Vec<&'a str>,
    train: Evaluation,
    test: Option<Evaluation>,
}

fn fit(
    plan: &ClassifyPlan,
    data: &[FeatureSequence],
) -> Result<(TrainedModel, Vec<FeatureSequence>, Vec<FeatureSequence>)> {
    let (train_set, test_set) = split(data, plan);
    let model = train(&train_set, &plan.config)?;
    Ok((model, train_set, test_set))
}

fn classify_step(inputs: &Inputs, scored: &Scored, plan: &ClassifyPlan, out: &mut Output) -> Result<Evaluation> {
    let data = feature_set(inputs, scored, &plan.options)?;
    let (model, train_set, test_set) = fit(plan, &data)?;
    out.bytes("model.cmdl", &model.to_bytes())?;
    let log_rows: Vec<Vec<String>> = model
        .log
        .iter()
        .map(|e| vec![e.iteration.to_string(), num(e.loss)])
        .collect();
    out.csv("training_log.csv", &header(&["iteration", "loss"]), &log_rows)?;
    let on_train = evaluate(&model, &train_set)?;
    let on_test = if test_set.is_empty() {
        None
    } else {
        Some(evaluate(&model, &test_set)?)
    };
    let shown = on_test.as_ref().unwrap_or(&on_train);
    let mut cols = header(&["true"]);
    cols.extend(Condition::ALL.iter().map(|c| c.to_string()));
    let rows: Vec<Vec<String>> = Condition::ALL
        .iter()
        .map(|c| {
            let mut row = vec![c.to_string()];
            row.extend(shown.confusion[c.index()].iter().map(|n| n.to_string()));
            row
        })
        .collect();
    out.csv("confusion.csv", &cols, &rows)?;
    let report = EvaluationReport {
        config: &plan.config,
        features: &plan.options,
        feature_dim: data.first().map_or(0, |s| s.feature_dim),
        train_sessions: train_set.iter().map(|s| s.session_id.as_str()).collect(),
        test_sessions: test_set.iter().map(|s| s.session_id.as_str()).collect(),
        train: on_train,
        test: on_test.clone(),
    };
    out.json("evaluation.json", &report)?;
    Ok(on_test.unwrap_or(report.train))
}

fn sweep_step(inputs: &Inputs, scored: &Scored, plan: &ClassifyPlan, out: &mut Output) -> Result<()> {
    let mut rows = Vec::new();
    for encoder in EncoderKind::ALL {
        for feature_mode in FeatureMode::ALL {
            let mut row = vec![encoder.as_str().to_string(), feature_mode.as_str().to_string()];
            for role_mode in RoleMode::ALL {
                let cell = ClassifyPlan {
                    config: ClassifierConfig {
                        encoder,
                        ..plan.config.clone()
                    },
                    options: FeatureOptions {
                        role_mode,
                        feature_mode,
                        ..plan.options
                    },
                    test_fraction: plan.test_fraction,
                };
                let data = feature_set(inputs, scored, &cell.options)?;
                let (model, train_set, test_set) = fit(&cell, &data)?;
                let eval_set = if test_set.is_empty() { &train_set } else { &test_set };
                row.push(num(evaluate(&model, eval_set)?.accuracy));
            }
            rows.push(row);
        }
    }
    let mut cols = header(&["encoder", "features"]);
    cols.extend(RoleMode::ALL.iter().map(|r| r.as_str().to_string()));
    out.csv("sweep.csv", &cols, &rows)
}

pub fn classify(a: &ClassifyArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let scored = context::score(&inputs)?;
    let plan = ClassifyPlan {
        config: ClassifierConfig {
            encoder: a.encoder.into(),
            hidden_dim: a.hidden,
            learning_rate: a.learning_rate,
            momentum: a.momentum,
            iterations: a.iterations,
            max_len: a.max_len,
            seed: a.seed,
            precision: a.precision.into(),
            clip_norm: a.clip_norm,
            log_every: a.log_every,
        },
        options: FeatureOptions {
            role_mode: a.role_mode.into(),
            feature_mode: a.features.into(),
            max_len: a.max_len,
            mirror_therapist: a.mirror_therapist,
            interleave: a.interleave,
        },
        test_fraction: a.test_fraction,
    };
    if !(0.0..1.0).contains(&a.test_fraction) {
        anyhow::bail!("test fraction must be in [0, 1), got {}", a.test_fraction);
    }
    if a.sweep {
        sweep_step(&inputs, &scored, &plan, &mut out)?;
    } else {
        let e = classify_step(&inputs, &scored, &plan, &mut out)?;
        println!("accuracy {} over {} sessions", num(e.accuracy), e.n);
    }
    inputs.save_cache()?;
    out.finish("classify", a, Some(a.seed))
}

#[derive(Serialize)]
struct PromptBlock {
    label: String,
    turns: Vec<RankedTurn>,
}

fn prompt_step(
    inputs: &Inputs,
    run: &TopicRun,
    template: PromptTemplate,
    top_n: usize,
    out: &mut Output,
) -> Result<String> {
    let flat: Vec<TurnTopicScore> = run.scores.iter().flatten().cloned().collect();
    let (source, role, dims) = match template {
        PromptTemplate::TenTopics => (flat, Speaker::Therapist, run.model.k),
        PromptTemplate::PrincipalPatient => (principal_scores(run)?, Speaker::Patient, run.principal.components.len()),
        PromptTemplate::PrincipalTherapist => (
            principal_scores(run)?,
            Speaker::Therapist,
            run.principal.components.len(),
        ),
    };
    let texts = text_index(inputs);
    let mut blocks = Vec::new();
    let mut selections = Vec::new();
    for k in 0..dims {
        let turns = top_turns(&source, role, k, top_n, None);
        let sentences = turns
            .iter()
            .filter_map(|r| texts.get(&(r.session_id.as_str(), r.turn_index)).map(|t| t.to_string()))
            .collect();
        let label = template.block_label(k);
        selections.push(TopicSelection {
            label: label.clone(),
            sentences,
        });
        blocks.push(PromptBlock { label, turns });
    }
    let doc = render_prompt(template, &selections)?;
    out.text(&format!("prompts/{}.txt", template.name()), &doc)?;
    out.json(&format!("prompts/{}.json", template.name()), &blocks)?;
    Ok(doc)
}

pub fn export_prompts(a: &PromptArgs) -> Result<()> {
    let mut out = Output::create(&a.input.out)?;
    let inputs = Inputs::load(&a.input, &mut out)?;
    let run = context::topics(&inputs, &a.topic, &mut out)?;
    for template in a.template.templates() {
        let doc = prompt_step(&inputs, &run, template, a.top_n, &mut out)?;
        if a.interpret {
            let response = llm::interpret(&a.endpoint, &a.model, &doc, &a.token_env)?;
            out.json(&format!("prompts/{}.response.json", template.name()), &response)?;
        }
    }
    inputs.save_cache()?;
    out.finish("export-prompts", a, Some(a.topic.topic_seed))
}

pub fn demo(a: &DemoArgs) -> Result<()> {
    let mut out = Output::create(&a.out)?;
    let corpus = demo_corpus(&DemoConfig {
        sessions_per_condition: a.sessions_per_condition,
        seed: a.seed,
        ..Default::default()
    });
    write_corpus(&out.dir().join("corpus"), &corpus)?;
    for s in &corpus {
        out.record(&format!("corpus/{}.json", s.session_id))?;
    }
    let embedder = CachedEmbedder::new(EmbeddingBackend::baseline(a.baseline_dim, 0)?);
    let inputs = Inputs::from_parts(corpus, embedder);

    let scored = context::score(&inputs)?;
    score_step(&inputs, &scored, &mut out)?;

    let topic_args = TopicArgs {
        topic_model: None,
        topics: alliance_core::topics::DEFAULT_TOPICS,
        top_k: alliance_core::topics::DEFAULT_TOP_K,
        components: alliance_core::topics::DEFAULT_COMPONENTS,
        topic_seed: 0x5eed,
    };
    let run = context::topics(&inputs, &topic_args, &mut out)?;
    topics_step(&inputs, &run, 10, &mut out)?;
    trajectories_step(&inputs, &scored, Some(&run), DEFAULT_MAX_INDEX, &mut out)?;
    for axis in [HeatmapAxis::Topics, HeatmapAxis::Principal] {
        heatmap_step(&scored, &run, axis, 100, &mut out)?;
    }
    for scale in Scale::ALL {
        for role in Speaker::BOTH {
            tests_step(
                &scored,
                None,
                Channel::from_scale(scale),
                role,
                TTestVariant::Student,
                SampleUnit::Turn,
                &mut out,
            )?;
        }
    }
    topic_eval_step(&inputs, &run.model, topic_args.top_k, &mut out)?;
    let plan = ClassifyPlan {
        config: ClassifierConfig {
            encoder: a.encoder.into(),
            hidden_dim: 16,
            iterations: a.iterations,
            seed: a.seed,
            ..Default::default()
        },
        options: FeatureOptions::default(),
        test_fraction: 0.2,
    };
    let e = classify_step(&inputs, &scored, &plan, &mut out)?;
    for template in PromptTemplate::ALL {
        prompt_step(&inputs, &run, template, 10, &mut out)?;
    }
    println!(
        "demo: {} sessions, classifier accuracy {} on {} held-out sessions, outputs in {}",
        inputs.corpus.len(),
        num(e.accuracy),
        e.n,
        out.dir().display()
    );
    out.finish("demo", a, Some(a.seed))
}
