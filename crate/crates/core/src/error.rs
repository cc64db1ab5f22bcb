use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("value count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("point {point:?} lies outside the kernel domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("atomic sigma rejected: {0}")]
    AtomicSigma(String),

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("grid of {cells} cells exceeds the budget of {budget}")]
    OverBudget { cells: usize, budget: usize },

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("start is not a supersolution: excess {excess:e} exceeds tolerance {tol:e}")]
    NotSupersolution { excess: f64, tol: f64 },

    #[error("NaN encountered in {0}")]
    NotANumber(&'static str),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
