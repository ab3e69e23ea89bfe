//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// A vector or matrix had a different shape than the operation requires.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Input violated a domain precondition.
    #[error("invalid input: {0}")]
    Domain(String),

    /// A matrix that must have full column rank does not.
    #[error("rank-deficient matrix: rank {rank} < dimension {dim}")]
    RankDeficient { rank: usize, dim: usize },

    /// Rejection sampling gave up because almost nothing passes the filter.
    #[error("sampler acceptance rate fell below {min_rate:e} (cap misconfigured?)")]
    SamplerStarved { min_rate: f64 },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite")]
    Divergence { epoch: usize, step: usize },

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("invalid override: {0}")]
    InvalidOverride(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
