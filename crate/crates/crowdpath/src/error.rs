use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient history: need {needed} steps, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no traversable path: {0}")]
    NoPath(String),

    #[error("prediction error: {0}")]
    Prediction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
