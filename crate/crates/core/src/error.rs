use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("corrupt store: {0}")]
    CorruptStore(String),

    #[error("incomplete store: missing {}", .0.display())]
    IncompleteStore(PathBuf),

    #[error("no tags above threshold")]
    NoTags,

    #[error("semantics violated: tag `{0}` missing from rephrased output")]
    SemanticsViolated(String),

    #[error("generation failed")]
    GenerationFailed,

    #[error("llm client: {0}")]
    Llm(String),

    #[error("divergence at step {step}: loss is {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("corpus too small: pool of {pool_size} requested from {corpus_size} items")]
    CorpusTooSmall {
        pool_size: usize,
        corpus_size: usize,
    },

    #[error("empty ranks")]
    EmptyRanks,

    #[error("missing modality: {0}")]
    MissingModality(String),

    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
