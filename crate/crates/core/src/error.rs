use std::io;

use thiserror::Error;

/// Failure categories, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has no nonzero entries")]
    ZeroColumn(usize),
    #[error("explicit zero stored at row {row}, column {col}")]
    ExplicitZero { row: usize, col: usize },
    #[error("malformed sparse matrix: {0}")]
    InvalidMatrix(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for dimension {dim}")]
    OutOfBounds { index: usize, dim: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: feature index {index} outside [1, {n_cols}]")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        n_cols: usize,
    },
    #[error("line {line}: feature indices are not strictly increasing")]
    UnsortedIndices { line: usize },
    #[error("line {line}: feature index {index} appears more than once")]
    DuplicateIndex { line: usize, index: usize },
    #[error("dataset contains no examples")]
    EmptyDataset,
    #[error("label {value} at example {index} is not +1 or -1")]
    InvalidLabel { index: usize, value: f64 },
    #[error("spectral radius estimate did not converge; pass a converged estimate or force")]
    UnconvergedRho,
    #[error("step parameters violate (eta/2)(1+sigma) < 1: eta={eta}, sigma={sigma}")]
    StepHypothesis { eta: f64, sigma: f64 },
    #[error("block-partition sampling needs P to divide d (d={d}, P={p})")]
    BlockPartition { d: usize, p: usize },
    #[error("accelerated shotgun only handles the unregularized loss (lambda must be 0, got {0})")]
    RegularizationUnsupported(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("reference optimum run failed: {0}")]
    Reference(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite(_) | Error::UnconvergedRho | Error::Reference(_) => {
                ErrorKind::Numerical
            }
            Error::Parse { .. }
            | Error::IndexOutOfRange { .. }
            | Error::UnsortedIndices { .. }
            | Error::DuplicateIndex { .. }
            | Error::EmptyDataset
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
