//! Error types shared across the engine.

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes at graph construction or matrix arithmetic.
    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },

    /// A forward value, gradient, or parameter became NaN/Inf.
    #[error("numeric health: non-finite value in {0}")]
    NumericHealth(String),

    /// Invalid configuration (bad ratios, zero sizes, unknown fields, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Dataset-level violation (dangling reference, empty split, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Load failure naming the offending file and line.
    #[error("{path}:{line}: {msg}")]
    Load {
        path: String,
        line: usize,
        msg: String,
    },

    /// Graph misuse (unbound input, non-scalar loss, ...).
    #[error("graph error: {0}")]
    Graph(String),

    /// Checkpoint save/load failure (version mismatch, truncation, ...).
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A metric that is undefined for the given input (e.g. single-class AUC).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
