use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("coefficients are not conjugate-symmetric (imaginary residue {residual:e})")]
    SymmetryViolation { residual: f64 },

    #[error("step size {0} outside (0, 1)")]
    StepSize(f64),

    #[error("final time {t_final} is not an integer multiple of step {h}")]
    StepCount { t_final: f64, h: f64 },

    #[error("non-finite coefficient after step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("reference has zero {0} norm")]
    ZeroReference(&'static str),

    #[error("error values must be positive and step sizes strictly decreasing: {0}")]
    InvalidErrorSeries(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("reference cache file {path}: {reason}")]
    CacheFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
