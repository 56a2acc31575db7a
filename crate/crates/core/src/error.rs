use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("drift generation failed after {attempts} attempts (last shift {last_shift})")]
    Generation { attempts: usize, last_shift: f64 },

    #[error("simulation blew up at step {step} (dt = {dt}, stability margin = {stability_margin})")]
    UnstableSimulation {
        step: usize,
        dt: f64,
        stability_margin: f64,
    },

    #[error("degenerate localization: no observation is active")]
    DegenerateLocalization,

    #[error("solver diverged at iteration {iteration}: objective = {objective}")]
    Divergence { iteration: usize, objective: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(expected: impl Into<String>, got: impl Into<String>) -> Error {
    Error::DimensionMismatch {
        expected: expected.into(),
        got: got.into(),
    }
}
