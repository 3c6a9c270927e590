//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid precision: {0}")]
    InvalidPrecision(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("numerical divergence at {location}: {detail}")]
    NumericalDivergence { location: String, detail: String },

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("extent violation: {0}")]
    ExtentViolation(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
