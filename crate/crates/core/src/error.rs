//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max |A - A^T| entry {max_asym:e} exceeds tolerance")]
    NotSymmetric { max_asym: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("rank-deficient matrix: eigenvalue {eigenvalue:e} below threshold {threshold:e}")]
    RankDeficient { eigenvalue: f64, threshold: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("completion of a full-dimensional subspace is empty (d = p = {p})")]
    EmptyCompletion { p: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("empty slice: slice {index} of {h} received no observations")]
    EmptySlice { index: usize, h: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
        }
    }
}
