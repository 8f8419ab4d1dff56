//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Array dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numeric input is outside the operation's domain (NaN, infinity,
    /// non-positive threshold, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural parameter (sparsity level, group count, grid) is invalid.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// An iterative fit blew up; the step size that produced it is named so
    /// callers can shrink it.
    #[error("divergence with step size eta = {eta}: objective reached {objective:.3e}")]
    Divergence { eta: f64, objective: f64 },

    /// Non-finite values appeared where the algorithm requires finite state.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The simulated transport saw a missing, duplicated, or mismatched
    /// message.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// CSV ingestion failed; `line` is the 1-based line in `file`.
    #[error("ingestion error in {file} at line {line}: {msg}")]
    Ingest { file: String, line: u64, msg: String },

    /// Hyperparameter selection could not produce a usable candidate.
    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
