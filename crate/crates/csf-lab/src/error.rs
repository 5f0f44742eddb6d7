use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    InvalidDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate generator spec: {0}")]
    DegenerateSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("diversity score needs at least two distinct skills")]
    SingleSkill,

    #[error("run failed: {0}")]
    RunFailed(String),

    #[error("missing or empty input: {0}")]
    MissingData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
