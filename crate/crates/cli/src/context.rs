//! Loading inputs and running the shared pipeline stages.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use alliance_core::alliance::{score_corpus, standardize};
use alliance_core::analytics::build_scored_sessions;
use alliance_core::topics::{
    derive_topic_vectors, learn_baseline_topics, principal_topics, score_corpus_topics, BaselineTopicConfig,
    TurnTopicScore,
};
use alliance_core::{
    default_inventory, load_corpus, AllianceSeries, CachedEmbedder, EmbeddingBackend, EmbeddingStore, Inventory,
    PrincipalTopics, ScoredSession, Session, TopicModel,
};
use anyhow::Context;

use crate::output::{hash_file, sha256_hex, Output};
use crate::{EmbeddingArgs, InputArgs, TopicArgs};

pub struct Inputs {
    pub corpus: Vec<Session>,
    pub inventory: Inventory,
    pub embedder: CachedEmbedder,
    cache_file: Option<PathBuf>,
}

fn corpus_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading corpus directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn build_embedder(args: &EmbeddingArgs, out: &mut Output) -> anyhow::Result<(CachedEmbedder, Option<PathBuf>)> {
    let (backend, identity) = match &args.store {
        Some(path) => {
            let store = EmbeddingStore::load(path).with_context(|| format!("loading store {}", path.display()))?;
            let hash = hash_file(path)?;
            out.inputs.insert("store".into(), hash.clone());
            let mut backend = EmbeddingBackend::store(Arc::new(store), args.fallback.into());
            backend.salt = args.salt;
            let identity = format!("{}:salt={}:sha256={hash}", backend.describe(), args.salt);
            (backend, identity)
        }
        None => {
            let backend = EmbeddingBackend::baseline(args.baseline_dim, args.salt)?;
            let identity = backend.describe();
            (backend, identity)
        }
    };
    let embedder = CachedEmbedder::new(backend);
    let cache_file = match &args.cache_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let file = dir.join(format!("embeddings-{}.cmps", &sha256_hex(identity.as_bytes())[..16]));
            if file.exists() {
                let cached =
                    EmbeddingStore::load(&file).with_context(|| format!("loading cache {}", file.display()))?;
                embedder.preload(cached.iter().map(|(k, v)| (*k, v.clone())))?;
            }
            Some(file)
        }
        None => None,
    };
    Ok((embedder, cache_file))
}

impl Inputs {
    pub fn load(args: &InputArgs, out: &mut Output) -> anyhow::Result<Self> {
        for path in corpus_files(&args.corpus)? {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.add_input(format!("corpus/{name}"), &path)?;
        }
        let corpus = load_corpus(&args.corpus).with_context(|| format!("loading corpus {}", args.corpus.display()))?;
        if corpus.is_empty() {
            anyhow::bail!("corpus directory {} has no sessions", args.corpus.display());
        }
        let inventory = match &args.inventory {
            Some(path) => {
                out.add_input("inventory", path)?;
                Inventory::load(path).with_context(|| format!("loading inventory {}", path.display()))?
            }
            None => default_inventory(),
        };
        let (embedder, cache_file) = build_embedder(&args.embedding, out)?;
        Ok(Self {
            corpus,
            inventory,
            embedder,
            cache_file,
        })
    }

    pub fn from_parts(corpus: Vec<Session>, embedder: CachedEmbedder) -> Self {
        Self {
            corpus,
            inventory: default_inventory(),
            embedder,
            cache_file: None,
        }
    }

    /// Persist the embedding cache, if one was requested.
    pub fn save_cache(&self) -> anyhow::Result<()> {
        let Some(file) = &self.cache_file else {
            return Ok(());
        };
        let mut store = EmbeddingStore::new(self.embedder.dim())?.with_provenance("cache");
        for (key, v) in self.embedder.snapshot() {
            store.insert_key(key, v)?;
        }
        store
            .save(file)
            .with_context(|| format!("writing cache {}", file.display()))?;
        Ok(())
    }
}

pub struct Scored {
    pub raw: Vec<AllianceSeries>,
    pub z: Vec<AllianceSeries>,
}

pub fn score(inputs: &Inputs) -> anyhow::Result<Scored> {
    let raw = score_corpus(&inputs.corpus, &inputs.inventory, &inputs.embedder)?;
    let z = standardize(&raw)?;
    Ok(Scored { raw, z })
}

pub struct TopicRun {
    pub model: TopicModel,
    pub scores: Vec<Vec<TurnTopicScore>>,
    pub principal: PrincipalTopics,
}

pub fn topic_model(inputs: &Inputs, args: &TopicArgs, out: &mut Output) -> anyhow::Result<TopicModel> {
    Ok(match &args.topic_model {
        Some(path) => {
            out.add_input("topic_model", path)?;
            TopicModel::load(path).with_context(|| format!("loading topic model {}", path.display()))?
        }
        None => {
            let config = BaselineTopicConfig {
                k: args.topics,
                seed: args.topic_seed,
                ..Default::default()
            };
            learn_baseline_topics(&inputs.corpus, &config)?
        }
    })
}

pub fn topics(inputs: &Inputs, args: &TopicArgs, out: &mut Output) -> anyhow::Result<TopicRun> {
    let model = topic_model(inputs, args, out)?;
    let vectors = derive_topic_vectors(&model, &inputs.embedder, args.top_k)?;
    let scores = score_corpus_topics(&inputs.corpus, &vectors, &inputs.embedder)?;
    let samples: Vec<Vec<f64>> = scores.iter().flatten().map(|t| t.scores.clone()).collect();
    let principal = principal_topics(&samples, args.components)?;
    Ok(TopicRun {
        model,
        scores,
        principal,
    })
}

pub fn sessions(series: &[AllianceSeries], topics: Option<&TopicRun>) -> anyhow::Result<Vec<ScoredSession>> {
    Ok(build_scored_sessions(
        series,
        topics.map(|t| t.scores.as_slice()),
        topics.map(|t| &t.principal),
    )?)
}
