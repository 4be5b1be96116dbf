use std::net::SocketAddr;
use std::sync::Arc;

use arc_swap::ArcSwap;
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::engine::Engine;
use crate::error::ServiceError;
use crate::index::ScoredTrack;

pub const DEFAULT_TOP_K: usize = 10;

/// Shared handle to the current engine. Readers take a snapshot without
/// locking; `replace` swaps in a new engine atomically.
#[derive(Clone)]
pub struct ServiceState {
    engine: Arc<ArcSwap<Engine>>,
}

impl ServiceState {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine: Arc::new(ArcSwap::from_pointee(engine)),
        }
    }

    pub fn current(&self) -> Arc<Engine> {
        self.engine.load_full()
    }

    pub fn replace(&self, engine: Engine) {
        self.engine.store(Arc::new(engine));
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub video_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResponse {
    pub results: Vec<ScoredTrack>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracksResponse {
    pub track_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideosResponse {
    pub video_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub tracks: usize,
    pub videos: usize,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!("{self}");
        }
        (
            self.status(),
            Json(ErrorBody {
                error: self.to_string(),
            }),
        )
            .into_response()
    }
}

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tracks", get(tracks))
        .route("/videos", get(videos))
        .route("/query", post(query))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn health(State(state): State<ServiceState>) -> Json<HealthResponse> {
    let engine = state.current();
    Json(HealthResponse {
        status: "ok".into(),
        tracks: engine.index().len(),
        videos: engine.video_ids().count(),
        fingerprint: engine.index().fingerprint().to_string(),
    })
}

async fn tracks(State(state): State<ServiceState>) -> Json<TracksResponse> {
    Json(TracksResponse {
        track_ids: state.current().index().track_ids().to_vec(),
    })
}

async fn videos(State(state): State<ServiceState>) -> Json<VideosResponse> {
    Json(VideosResponse {
        video_ids: state.current().video_ids().map(String::from).collect(),
    })
}

async fn query(
    State(state): State<ServiceState>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ServiceError> {
    let Json(request) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let engine = state.current();
    let results = tokio::task::spawn_blocking(move || {
        engine.query(&request.video_id, &request.text, request.top_k)
    })
    .await
    .map_err(|e| ServiceError::Internal(format!("query task failed: {e}")))??;
    Ok(Json(QueryResponse { results }))
}

/// Serves until ctrl-c.
pub async fn serve(state: ServiceState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
