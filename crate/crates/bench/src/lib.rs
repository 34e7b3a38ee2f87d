//! Shared workloads for the benchmarks.

use alliance_core::{demo_corpus, CachedEmbedder, DemoConfig, EmbeddingBackend, Session};

pub struct Workload {
    pub corpus: Vec<Session>,
    pub embedder: CachedEmbedder,
}

/// Demo corpus with `per_condition` sessions per condition and a fresh baseline embedder.
pub fn workload(per_condition: usize, dim: usize) -> Workload {
    let corpus = demo_corpus(&DemoConfig {
        sessions_per_condition: per_condition,
        ..Default::default()
    });
    let embedder = CachedEmbedder::new(EmbeddingBackend::baseline(dim, 0).expect("valid dim"));
    Workload { corpus, embedder }
}
