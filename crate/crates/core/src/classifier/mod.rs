//! Session-level condition classifiers over per-dyad feature sequences.

pub mod features;
pub mod io;
pub mod network;
pub mod synthetic;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Condition;
use crate::embedding::EmbeddingError;

pub use features::{build_features, FeatureMode, FeatureOptions, FeatureSequence, RoleMode, DEFAULT_MAX_LEN};
pub use network::{layout, Block, Dims, EncoderKind, Real};

use network::{initialize, lit, Network};

pub const CLASSES: usize = 4;

#[derive(Error, Debug)]
pub enum ClassifierError {
    #[error("session {0} has no patient→therapist dyads")]
    EmptyDyads(String),
    #[error("feature mode needs turn embeddings but no embedder was given")]
    MissingEmbedding,
    #[error("scores do not line up with session {0}")]
    Misaligned(String),
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sequence {0} has no unmasked steps")]
    EmptySequence(String),
    #[error("no training sequences for class {0}")]
    EmptyClass(Condition),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(usize),
    #[error("gradient check requires 64-bit precision")]
    PrecisionMode,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "32")]
    F32,
    #[default]
    #[serde(rename = "64")]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub encoder: EncoderKind,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub max_len: usize,
    pub seed: u64,
    pub precision: Precision,
    pub clip_norm: f64,
    /// Log the mean loss of every `log_every` iterations.
    pub log_every: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Recurrent,
            hidden_dim: 64,
            learning_rate: 0.001,
            momentum: 0.9,
            iterations: 50_000,
            max_len: DEFAULT_MAX_LEN,
            seed: 0,
            precision: Precision::F64,
            clip_norm: 5.0,
            log_every: 100,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.max_len == 0 {
            return bad("max_len must be positive");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("clip norm must be positive");
        }
        if self.log_every == 0 {
            return bad("log_every must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub encoder: EncoderKind,
    pub precision: Precision,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub labels: [Condition; CLASSES],
    pub blocks: Vec<Block>,
    /// All parameter tensors, flattened in block order.
    pub params: Vec<f64>,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Condition,
    pub logits: Vec<f64>,
}

fn valid_steps<F: Real>(seq: &FeatureSequence) -> Vec<(usize, Vec<F>)> {
    seq.steps
        .iter()
        .zip(&seq.mask)
        .enumerate()
        .filter(|(_, (_, &m))| m)
        .map(|(t, (row, _))| (t, row.iter().map(|&x| lit::<F>(x)).collect()))
        .collect()
}

fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate().skip(1) {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    /// A freshly initialized (untrained) model.
    pub fn initialize(config: &ClassifierConfig, feature_dim: usize) -> Result<Self, ClassifierError> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(ClassifierError::InvalidConfig("feature_dim must be positive".into()));
        }
        let blocks = layout(config.encoder, Self::dims_for(feature_dim, config.hidden_dim));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = match config.precision {
            Precision::F64 => initialize::<f64, _>(&blocks, &mut rng),
            Precision::F32 => initialize::<f32, _>(&blocks, &mut rng)
                .into_iter()
                .map(f64::from)
                .collect(),
        };
        Ok(Self {
            encoder: config.encoder,
            precision: config.precision,
            feature_dim,
            hidden_dim: config.hidden_dim,
            labels: Condition::ALL,
            blocks,
            params,
            log: Vec::new(),
        })
    }

    fn dims_for(feature_dim: usize, hidden: usize) -> Dims {
        Dims {
            input: feature_dim,
            hidden,
            classes: CLASSES,
        }
    }

    pub fn dims(&self) -> Dims {
        Self::dims_for(self.feature_dim, self.hidden_dim)
    }

    fn network(&self) -> Network<'_> {
        Network {
            encoder: self.encoder,
            dims: self.dims(),
            blocks: &self.blocks,
        }
    }

    fn check_sequence(&self, seq: &FeatureSequence) -> Result<(), ClassifierError> {
        if seq.feature_dim != self.feature_dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.feature_dim,
                found: seq.feature_dim,
            });
        }
        if let Some(bad) = seq.steps.iter().find(|r| r.len() != self.feature_dim) {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.feature_dim,
                found: bad.len(),
            });
        }
        if seq.valid_steps() == 0 {
            return Err(ClassifierError::EmptySequence(seq.session_id.clone()));
        }
        Ok(())
    }

    pub fn logits(&self, seq: &FeatureSequence) -> Result<Vec<f64>, ClassifierError> {
        self.check_sequence(seq)?;
        let net = self.network();
        Ok(match self.precision {
            Precision::F64 => net.logits(&self.params, &valid_steps::<f64>(seq)),
            Precision::F32 => {
                let p: Vec<f32> = self.params.iter().map(|&x| x as f32).collect();
                net.logits(&p, &valid_steps::<f32>(seq))
                    .into_iter()
                    .map(f64::from)
                    .collect()
            }
        })
    }

    /// Arg-max class; ties go to the earliest class in condition order.
    pub fn predict(&self, seq: &FeatureSequence) -> Result<Prediction, ClassifierError> {
        let logits = self.logits(seq)?;
        Ok(Prediction {
            label: self.labels[argmax(&logits)],
            logits,
        })
    }

    /// Loss and analytic gradient at the current parameters (64-bit).
    pub fn loss_and_gradient(&self, seq: &FeatureSequence) -> Result<(f64, Vec<f64>), ClassifierError> {
        self.check_sequence(seq)?;
        let steps = valid_steps::<f64>(seq);
        let mut grad = vec![0.0; self.params.len()];
        let loss = self
            .network()
            .loss_and_grad(&self.params, &steps, seq.label.index(), &mut grad);
        Ok((loss, grad))
    }

    /// Replace every parameter by a uniform draw in `[-scale, scale]`.
    pub fn randomize(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.params {
            *p = rng.gen_range(-scale..=scale);
            if self.precision == Precision::F32 {
                *p = *p as f32 as f64;
            }
        }
    }
}

/// Draws a class uniformly, then a member of that class uniformly.
pub struct BalancedSampler {
    by_class: Vec<Vec<usize>>,
}

impl BalancedSampler {
    pub fn new(labels: &[Condition]) -> Result<Self, ClassifierError> {
        let mut by_class = vec![Vec::new(); CLASSES];
        for (i, l) in labels.iter().enumerate() {
            by_class[l.index()].push(i);
        }
        if let Some(c) = by_class.iter().position(Vec::is_empty) {
            return Err(ClassifierError::EmptyClass(Condition::ALL[c]));
        }
        Ok(Self { by_class })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let class = &self.by_class[rng.gen_range(0..CLASSES)];
        class[rng.gen_range(0..class.len())]
    }
}

fn check_dataset(data: &[FeatureSequence]) -> Result<usize, ClassifierError> {
    let first = data.first().ok_or(ClassifierError::EmptyDataset)?;
    for s in data {
        if s.feature_dim != first.feature_dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: first.feature_dim,
                found: s.feature_dim,
            });
        }
        if s.valid_steps() == 0 {
            return Err(ClassifierError::EmptySequence(s.session_id.clone()));
        }
    }
    Ok(first.feature_dim)
}

fn train_in<F: Real>(
    model: &mut TrainedModel,
    data: &[FeatureSequence],
    config: &ClassifierConfig,
) -> Result<(), ClassifierError> {
    let labels: Vec<Condition> = data.iter().map(|s| s.label).collect();
    let sampler = BalancedSampler::new(&labels)?;
    let prepared: Vec<Vec<(usize, Vec<F>)>> = data.iter().map(valid_steps::<F>).collect();
    let mut params: Vec<F> = model.params.iter().map(|&x| lit::<F>(x)).collect();
    let mut velocity = vec![F::zero(); params.len()];
    let mut grad = vec![F::zero(); params.len()];
    let lr = lit::<F>(config.learning_rate);
    let mu = lit::<F>(config.momentum);
    let clip = lit::<F>(config.clip_norm);
    let net = model.network();
    // separate stream from initialization
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5a4d_504c_4552);
    let mut window = 0.0f64;
    let mut log = Vec::new();
    for iteration in 0..config.iterations {
        let idx = sampler.draw(&mut rng);
        let loss = net.loss_and_grad(&params, &prepared[idx], data[idx].label.index(), &mut grad);
        if !loss.is_finite() {
            return Err(ClassifierError::NonFiniteLoss { iteration });
        }
        let norm = grad.iter().fold(F::zero(), |s, &g| s + g * g).sqrt();
        let factor = if norm > clip { clip / norm } else { F::one() };
        for ((p, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = mu * *v + g * factor;
            *p = *p - lr * *v;
        }
        window += loss.to_f64().unwrap_or(f64::NAN);
        if (iteration + 1) % config.log_every == 0 {
            log.push(LogEntry {
                iteration: iteration + 1,
                loss: window / config.log_every as f64,
            });
            window = 0.0;
        }
    }
    model.log = log;
    model.params = params.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
    Ok(())
}

/// Class-balanced momentum SGD with gradient-norm clipping. Deterministic
/// for a fixed seed and precision.
pub fn train(data: &[FeatureSequence], config: &ClassifierConfig) -> Result<TrainedModel, ClassifierError> {
    let feature_dim = check_dataset(data)?;
    let mut model = TrainedModel::initialize(config, feature_dim)?;
    match config.precision {
        Precision::F64 => train_in::<f64>(&mut model, data, config)?,
        Precision::F32 => train_in::<f32>(&mut model, data, config)?,
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]` in condition order.
    pub confusion: [[usize; CLASSES]; CLASSES],
    pub n: usize,
}

pub fn evaluate(model: &TrainedModel, data: &[FeatureSequence]) -> Result<Evaluation, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let predicted: Vec<Condition> = data
        .par_iter()
        .map(|s| model.predict(s).map(|p| p.label))
        .collect::<Result<_, _>>()?;
    let mut confusion = [[0usize; CLASSES]; CLASSES];
    for (s, p) in data.iter().zip(&predicted) {
        confusion[s.label.index()][p.index()] += 1;
    }
    let correct: usize = (0..CLASSES).map(|i| confusion[i][i]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        confusion,
        n: data.len(),
    })
}

/// Largest relative error between the analytic gradient and central
/// differences of the loss, over every parameter.
pub fn gradient_check(model: &TrainedModel, seq: &FeatureSequence, step: f64) -> Result<f64, ClassifierError> {
    if model.precision != Precision::F64 {
        return Err(ClassifierError::PrecisionMode);
    }
    let (_, analytic) = model.loss_and_gradient(seq)?;
    let steps = valid_steps::<f64>(seq);
    let net = model.network();
    let label = seq.label.index();
    let mut params = model.params.clone();
    let mut scratch = vec![0.0; params.len()];
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        if !a.is_finite() {
            return Err(ClassifierError::NonFiniteGradient(i));
        }
        let orig = params[i];
        params[i] = orig + step;
        let up = net.loss_and_grad(&params, &steps, label, &mut scratch);
        params[i] = orig - step;
        let down = net.loss_and_grad(&params, &steps, label, &mut scratch);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        if !numeric.is_finite() {
            return Err(ClassifierError::NonFiniteGradient(i));
        }
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Seeded stratified split into (train, test) indices; each class sends
/// `round(n·test_fraction)` members to the test side.
pub fn stratified_split(labels: &[Condition], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for c in Condition::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    (train_idx, test_idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(label: Condition, rows: Vec<Vec<f64>>) -> FeatureSequence {
        FeatureSequence::from_rows("s", label, rows, 6).unwrap()
    }

    #[test]
    fn untrained_predicts_first_class() {
        let cfg = ClassifierConfig {
            encoder: EncoderKind::PooledLinear,
            ..Default::default()
        };
        let m = TrainedModel::initialize(&cfg, 3).unwrap();
        let p = m
            .predict(&seq(Condition::Suicidality, vec![vec![1.0, 2.0, 3.0]]))
            .unwrap();
        assert_eq!(p.label, Condition::Anxiety);
        assert_eq!(p.logits, vec![0.0; 4]);
    }

    #[test]
    fn tie_break_and_argmax() {
        assert_eq!(argmax(&[0.0, 1.0, 1.0, 0.5]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 2.0, 2.0]), 0);
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 0.1]), 3);
    }

    #[test]
    fn hand_confusion() {
        let cfg = ClassifierConfig {
            encoder: EncoderKind::PooledLinear,
            ..Default::default()
        };
        let mut m = TrainedModel::initialize(&cfg, 2).unwrap();
        // logits = W x with W rows (1,0), (0,1), (0,0), (0,0): predicts class by larger feature
        m.params[..8].copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let data = vec![
            seq(Condition::Anxiety, vec![vec![1.0, 0.0]]),
            seq(Condition::Depression, vec![vec![1.0, 0.0]]),
            seq(Condition::Depression, vec![vec![0.0, 1.0]]),
            seq(Condition::Schizophrenia, vec![vec![-1.0, -1.0]]),
        ];
        let e = evaluate(&m, &data).unwrap();
        assert_eq!(e.accuracy, 0.75);
        let mut expected = [[0usize; 4]; 4];
        expected[0][0] = 1;
        expected[1][0] = 1;
        expected[1][1] = 1;
        expected[2][2] = 1;
        assert_eq!(e.confusion, expected);
    }

    #[test]
    fn sampler_balance() {
        let labels: Vec<Condition> = (0..100)
            .map(|i| {
                if i < 70 {
                    Condition::Anxiety
                } else {
                    Condition::ALL[1 + i % 3]
                }
            })
            .collect();
        let s = BalancedSampler::new(&labels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[labels[s.draw(&mut rng)].index()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 0.25).abs() <= 0.02, "{counts:?}");
        }
        assert!(matches!(
            BalancedSampler::new(&labels[..70]),
            Err(ClassifierError::EmptyClass(Condition::Depression))
        ));
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<Condition> = (0..40).map(|i| Condition::ALL[i % 4]).collect();
        let (tr, te) = stratified_split(&labels, 0.2, 9);
        assert_eq!(tr.len(), 32);
        assert_eq!(te.len(), 8);
        for c in Condition::ALL {
            assert_eq!(te.iter().filter(|&&i| labels[i] == c).count(), 2);
        }
        assert_eq!((tr.clone(), te.clone()), stratified_split(&labels, 0.2, 9));
    }

    #[test]
    fn zero_iterations_is_initialization() {
        let data: Vec<FeatureSequence> = Condition::ALL.iter().map(|&c| seq(c, vec![vec![1.0]])).collect();
        let cfg = ClassifierConfig {
            encoder: EncoderKind::Recurrent,
            hidden_dim: 4,
            iterations: 0,
            seed: 11,
            ..Default::default()
        };
        let m = train(&data, &cfg).unwrap();
        assert_eq!(m.params, TrainedModel::initialize(&cfg, 1).unwrap().params);
        assert!(m.log.is_empty());
    }

    #[test]
    fn config_validation() {
        let c = ClassifierConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = ClassifierConfig {
            hidden_dim: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(ClassifierConfig::default().validate().is_ok());
    }
}
