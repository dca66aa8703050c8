use thiserror::Error;

pub type Result<T> = std::result::Result<T, QhjError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QhjError {
    #[error("x = {x} lies outside the potential's domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("bracket [{lo}, {hi}] does not contain level {level} (levels below endpoints: {count_lo}, {count_hi})")]
    Bracket {
        level: usize,
        lo: f64,
        hi: f64,
        count_lo: usize,
        count_hi: usize,
    },

    #[error("no convergence after {iterations} iterations: {detail}")]
    Convergence { iterations: usize, detail: String },

    #[error("grid too coarse near x = {x}: {detail}")]
    Resolution { x: f64, detail: String },

    #[error("energy step {delta_e} too large: Richardson mismatch {mismatch:e} exceeds {limit:e}")]
    StepSize {
        delta_e: f64,
        mismatch: f64,
        limit: f64,
    },

    #[error("nothing to evaluate: {0}")]
    EmptyRegion(String),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(QhjError::Validation(msg.into()))
}
