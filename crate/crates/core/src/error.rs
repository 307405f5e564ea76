use thiserror::Error;

use crate::model::Violation;

/// Errors produced by the analytics, simulation and detection routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// The blended covariance `alpha*S0 + (1-alpha)*S1` failed Cholesky.
    #[error("blended covariance is not positive definite at alpha={alpha} (dimension {dim}, min diagonal {min_diagonal:e})")]
    NotPositiveDefinite {
        alpha: f64,
        dim: usize,
        min_diagonal: f64,
    },

    #[error("unsupported configuration: cloud covariance is defined for 2 cells, got {cells}")]
    UnsupportedCells { cells: usize },

    #[error("infinite quantization noise; cloud mode unavailable (fronthaul capacity is 0)")]
    InfiniteQuantizationNoise,

    #[error("quantization solver did not converge: residual {residual:e} bits after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("exact likelihood enumeration needs {terms} terms (limit {limit})")]
    TooManyTerms { terms: u128, limit: u128 },

    #[error("need at least {needed} usable points for the exponent fit, got {usable}")]
    InsufficientPoints { usable: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
