//! Retrieval evaluation: each query ranks its ground-truth music track
//! within a seeded pool of candidates; Recall@K and median rank are
//! aggregated over queries.

mod metrics;
mod pool;
mod retrieval;

pub use metrics::{median_rank, recall_at_k, Protocol, QueryMode, RetrievalReport, RECALL_KS};
pub use pool::{build_pool, rank_of_positive, PoolSpec, CLIP_POOL_SIZE, TRACK_POOL_SIZE};
pub use retrieval::{
    embed_corpus, ensemble_score, evaluate, evaluate_embeddings, evaluate_ensemble, evaluate_with,
    random_unit_embeddings,
};
