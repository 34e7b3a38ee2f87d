//! Turn-level working-alliance inference for therapy transcripts.
//!
//! Turns are embedded and compared with the 36 items of the Working Alliance
//! Inventory; signed item similarities aggregate into task, bond and goal
//! scales. On top of that sit turn-level topic scores, principal topics,
//! per-condition analytics, topic-model evaluation and sequence classifiers.

pub mod alliance;
pub mod analytics;
pub mod classifier;
pub mod corpus;
pub mod embedding;
pub mod inventory;
pub mod linalg;
pub mod synth;
pub mod topiceval;
pub mod topics;

pub use alliance::{score_corpus, standardize, AllianceError, AllianceScorer, AllianceSeries, TurnAllianceScore};
pub use analytics::{AnalyticsError, Channel, ScoredSession, ScoredTurn, Trajectory};
pub use classifier::{ClassifierConfig, ClassifierError, EncoderKind, FeatureSequence, TrainedModel};
pub use corpus::{load_corpus, Condition, CorpusError, Session, Speaker, Turn};
pub use embedding::{CachedEmbedder, EmbeddingBackend, EmbeddingError, EmbeddingStore, Fallback, Vector};
pub use inventory::{default_inventory, Inventory, InventoryError, KeyTable, Scale, ScaleScores};
pub use synth::{demo_corpus, DemoConfig};
pub use topiceval::{CoherenceMetric, TopicEvalError};
pub use topics::{PrincipalTopics, TopicError, TopicModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
