mod commands;
mod context;
mod llm;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use alliance_core::analytics::{HeatmapAxis, SampleUnit, TTestVariant};
use alliance_core::classifier::{FeatureMode, Precision, RoleMode};
use alliance_core::topics::PromptTemplate;
use alliance_core::{Channel, EncoderKind, Fallback, Speaker};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "alliance",
    version,
    about = "Working-alliance and topic analytics for therapy transcripts"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every turn on the 36 inventory items and the four scales.
    Score(ScoreArgs),
    /// Per-condition average trajectories and cumulative discrepancies.
    Trajectories(TrajectoryArgs),
    /// Learn or load topics, score turns, fit principal topics.
    Topics(TopicsArgs),
    /// Topic diversity and coherence, overall and per condition.
    TopicEval(TopicEvalArgs),
    /// Topic-conditioned alliance of the following patient turn.
    Heatmap(HeatmapArgs),
    /// Pairwise condition t-tests for one channel and role.
    Tests(TestsArgs),
    /// Train and evaluate the condition classifier.
    Classify(ClassifyArgs),
    /// Render interpretation prompts from top-ranked turns.
    ExportPrompts(PromptArgs),
    /// Generate a synthetic corpus and run the whole pipeline on it.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FallbackArg {
    Error,
    Baseline,
}

impl From<FallbackArg> for Fallback {
    fn from(f: FallbackArg) -> Self {
        match f {
            FallbackArg::Error => Fallback::Error,
            FallbackArg::Baseline => Fallback::Baseline,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EmbeddingArgs {
    /// Precomputed embedding store (binary or JSONL). Without it the hashed baseline embedder is used.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Dimension of the baseline embedder.
    #[arg(long, default_value_t = 64)]
    pub baseline_dim: usize,
    /// Salt of the baseline embedder.
    #[arg(long, default_value_t = 0)]
    pub salt: u64,
    /// Behaviour on a store miss.
    #[arg(long, value_enum, default_value_t = FallbackArg::Error)]
    pub fallback: FallbackArg,
    /// Directory for a persistent embedding cache.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InputArgs {
    /// Directory of session JSON files.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Inventory JSON (default: built-in 36-item inventory).
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub embedding: EmbeddingArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TopicArgs {
    /// Topic model JSON (default: learn the baseline model from the corpus).
    #[arg(long)]
    pub topic_model: Option<PathBuf>,
    /// Number of baseline topics.
    #[arg(long, default_value_t = 10)]
    pub topics: usize,
    /// Top words per topic for topic vectors and evaluation.
    #[arg(long, default_value_t = 25)]
    pub top_k: usize,
    /// Number of principal topics.
    #[arg(long, default_value_t = 3)]
    pub components: usize,
    /// Seed for baseline topic learning.
    #[arg(long, default_value_t = 0x5eed)]
    pub topic_seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also emit topic and principal-topic channels.
    #[arg(long)]
    pub with_topics: bool,
    #[command(flatten)]
    pub topic: TopicArgs,
    /// Longest trajectory index.
    #[arg(long, default_value_t = 100)]
    pub max_index: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TopicsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub topic: TopicArgs,
    /// Turns listed per role and topic in the top-turns table.
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TopicEvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub topic: TopicArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisArg {
    Topics,
    Principal,
}

impl From<AxisArg> for HeatmapAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Topics => HeatmapAxis::Topics,
            AxisArg::Principal => HeatmapAxis::Principal,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub topic: TopicArgs,
    #[arg(long, value_enum, default_value_t = AxisArg::Topics)]
    pub axis: AxisArg,
    /// Top therapist turns per condition and topic.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleArg {
    Patient,
    Therapist,
}

impl From<RoleArg> for Speaker {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Patient => Speaker::Patient,
            RoleArg::Therapist => Speaker::Therapist,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Student,
    Welch,
}

impl From<VariantArg> for TTestVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Student => TTestVariant::Student,
            VariantArg::Welch => TTestVariant::Welch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitArg {
    Turn,
    SessionMean,
}

impl From<UnitArg> for SampleUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Turn => SampleUnit::Turn,
            UnitArg::SessionMean => SampleUnit::SessionMean,
        }
    }
}

fn parse_channel(s: &str) -> Result<Channel, String> {
    s.parse()
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TestsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub topic: TopicArgs,
    /// task, bond, goal, full, topic_<k> or PT_<m>.
    #[arg(long, alias = "channel", value_parser = parse_channel, default_value = "task")]
    #[serde(serialize_with = "output::display")]
    pub scale: Channel,
    #[arg(long, value_enum, default_value_t = RoleArg::Patient)]
    pub role: RoleArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Student)]
    pub variant: VariantArg,
    #[arg(long, value_enum, default_value_t = UnitArg::Turn)]
    pub unit: UnitArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderArg {
    Recurrent,
    Attention,
    PooledLinear,
}

impl From<EncoderArg> for EncoderKind {
    fn from(e: EncoderArg) -> Self {
        match e {
            EncoderArg::Recurrent => EncoderKind::Recurrent,
            EncoderArg::Attention => EncoderKind::Attention,
            EncoderArg::PooledLinear => EncoderKind::PooledLinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleModeArg {
    Patient,
    Therapist,
    Both,
}

impl From<RoleModeArg> for RoleMode {
    fn from(r: RoleModeArg) -> Self {
        match r {
            RoleModeArg::Patient => RoleMode::Patient,
            RoleModeArg::Therapist => RoleMode::Therapist,
            RoleModeArg::Both => RoleMode::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureArg {
    Scores,
    Embedding,
    Combined,
}

impl From<FeatureArg> for FeatureMode {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Scores => FeatureMode::Scores,
            FeatureArg::Embedding => FeatureMode::Embedding,
            FeatureArg::Combined => FeatureMode::Combined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum PrecisionArg {
    #[value(name = "32")]
    #[serde(rename = "32")]
    F32,
    #[value(name = "64")]
    #[serde(rename = "64")]
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = EncoderArg::Recurrent)]
    pub encoder: EncoderArg,
    #[arg(long, value_enum, default_value_t = RoleModeArg::Both)]
    pub role_mode: RoleModeArg,
    #[arg(long, value_enum, default_value_t = FeatureArg::Combined)]
    pub features: FeatureArg,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 50_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    pub precision: PrecisionArg,
    /// Fraction of each class held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Build the patient half of each dyad from the therapist turn.
    #[arg(long)]
    pub mirror_therapist: bool,
    /// Emit patient and therapist turns as separate steps.
    #[arg(long)]
    pub interleave: bool,
    /// Train every encoder x feature x role combination and tabulate test accuracy.
    #[arg(long)]
    pub sweep: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateArg {
    TenTopics,
    PrincipalPatient,
    PrincipalTherapist,
    All,
}

impl TemplateArg {
    pub fn templates(self) -> Vec<PromptTemplate> {
        match self {
            TemplateArg::TenTopics => vec![PromptTemplate::TenTopics],
            TemplateArg::PrincipalPatient => vec![PromptTemplate::PrincipalPatient],
            TemplateArg::PrincipalTherapist => vec![PromptTemplate::PrincipalTherapist],
            TemplateArg::All => PromptTemplate::ALL.to_vec(),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PromptArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub topic: TopicArgs,
    #[arg(long, value_enum, default_value_t = TemplateArg::All)]
    pub template: TemplateArg,
    /// Sentences per topic block.
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Send each prompt to a chat-completion endpoint.
    #[arg(long)]
    pub interpret: bool,
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    pub endpoint: String,
    #[arg(long, default_value = "gpt-4")]
    pub model: String,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = "ALLIANCE_LLM_TOKEN")]
    pub token_env: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DemoArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub sessions_per_condition: usize,
    #[arg(long, default_value_t = 64)]
    pub baseline_dim: usize,
    /// Classifier training iterations.
    #[arg(long, default_value_t = 2_000)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value_t = EncoderArg::PooledLinear)]
    pub encoder: EncoderArg,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Score(a) => commands::score(&a),
        Command::Trajectories(a) => commands::trajectories(&a),
        Command::Topics(a) => commands::topics(&a),
        Command::TopicEval(a) => commands::topic_eval(&a),
        Command::Heatmap(a) => commands::heatmap(&a),
        Command::Tests(a) => commands::tests(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::ExportPrompts(a) => commands::export_prompts(&a),
        Command::Demo(a) => commands::demo(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
