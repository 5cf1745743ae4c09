//! Data generators for the simulation models, population-moment oracles and
//! the replication study harness.
//!
//! No local-smoothing forward competitor is included in the estimator
//! roster; the OLS rows serve as the forward-method baseline curve.

pub mod models;
pub mod rng;
pub mod study;

pub use models::{
    delta_sir_gap, expected_within_slice_variance, generate, ols_oracles, population_moments,
    OlsOracles, PopulationMoments, SimConfig, SimModel, Sweep, SweepParam,
};
pub use study::{bootstrap_mean_diff_ci, run_study, EstimatorSpec, StudyRow, StudyTable};
