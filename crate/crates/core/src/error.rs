use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPositiveDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("factor {index} is degenerate (norm {norm:e})")]
    DegenerateFactor { index: usize, norm: f64 },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unsupported format version: {0}")]
    Version(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from the data or the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::SolverFailure(_) | Error::DegenerateFactor { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
