use thiserror::Error;

/// Errors produced by the toolkit's numerical operations.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("non-finite value in {context} at {coords:?}")]
    NonFinite { context: String, coords: Vec<f64> },

    /// Integration aborted because the trajectory left the bounded chart
    /// region or the step size underflowed. Carries the last reachable time.
    #[error("trajectory diverged at t = {t}: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl CoreError {
    pub fn is_divergence(&self) -> bool {
        matches!(self, CoreError::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
