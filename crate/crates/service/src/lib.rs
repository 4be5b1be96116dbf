//! HTTP retrieval over a pre-embedded music index.
//!
//! Routes: `GET /health`, `GET /tracks`, `GET /videos` and `POST /query`
//! with a body of `{video_id, text, top_k}`.

mod engine;
mod error;
mod http;
mod index;

pub use engine::Engine;
pub use error::ServiceError;
pub use http::{
    router, serve, ErrorBody, HealthResponse, QueryRequest, QueryResponse, ServiceState,
    TracksResponse, VideosResponse, DEFAULT_TOP_K,
};
pub use index::{build_index, model_fingerprint, MusicIndex, ScoredTrack};
