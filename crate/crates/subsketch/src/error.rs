use thiserror::Error;

/// Errors surfaced by sketch construction and queries.
#[derive(Debug, Error)]
pub enum SketchError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, SketchError>;

impl SketchError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SketchError::InvalidInput(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        SketchError::Degenerate(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        SketchError::Numeric(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        SketchError::Unsupported(msg.into())
    }
}
