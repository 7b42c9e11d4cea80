//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (CoNLL lines, tag syntax), with file position.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A precondition on arguments or data was violated.
    #[error("{0}")]
    Invalid(String),

    /// The imbalance sampler exhausted its search budget off-target.
    #[error("infeasible entity percentage: target {target}%, best achieved {best:.3}%")]
    Infeasible { target: f64, best: f64 },

    /// Model file could not be read back (bad version, truncation, ...).
    #[error("model file {path}: {msg}")]
    ModelFormat { path: String, msg: String },

    /// A gradient went NaN/inf; named by parameter group.
    #[error("non-finite gradient in {0}")]
    NonFinite(String),

    /// Array/sequence dimensions disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Bad configuration (unknown key, out-of-range value).
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
