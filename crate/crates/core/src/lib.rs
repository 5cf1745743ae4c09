//! Model-based sufficient dimension reduction for regression.
//!
//! The crate fits inverse regression models in which the conditional mean of
//! the predictors X given the response Y lies in a low-dimensional subspace.
//! Estimators include principal components (PC), isotropic and extended
//! principal fitted components (PFC), general PFC with unstructured
//! conditional covariance, sliced inverse regression (SIR) and OLS, together
//! with likelihood-ratio selection of the reductive dimension and a Monte
//! Carlo harness for comparing the estimators on synthetic models.

pub mod basis;
pub mod error;
pub mod estimators;
pub mod expfam;
pub mod grassmann;
pub mod linalg;
pub mod moments;
pub(crate) mod prob;
pub mod selection;
pub mod simulate;

pub use basis::{build_basis, BasisKind, BasisMatrix};
pub use error::{Error, Result};
pub use estimators::{FittedReduction, Method, Strategy};
pub use linalg::{Subspace, SymEig};
pub use moments::{Dataset, MomentSet};
