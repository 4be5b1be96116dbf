use axum::http::StatusCode;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown video `{0}`")]
    UnknownVideo(String),

    #[error("top_k must be between 1 and {index_size}, got {top_k}")]
    InvalidTopK { top_k: usize, index_size: usize },

    #[error("malformed request: {0}")]
    BadRequest(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Core(#[from] viml::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownVideo(_) => StatusCode::NOT_FOUND,
            ServiceError::InvalidTopK { .. } | ServiceError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::DimensionMismatch(_)
            | ServiceError::Internal(_)
            | ServiceError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}
