//! Fitting procedures for the inverse regression models: PC, isotropic PFC,
//! extended PC/PFC, general PFC (known and estimated conditional covariance),
//! SIR and OLS, plus application of a fitted reduction to new predictors.
//!
//! Log-likelihoods drop additive constants but keep every data-dependent
//! term within a model family, so likelihood ratios between nested fits of
//! the same family are valid. Comparing log-likelihoods across families is
//! undefined.

mod extended;
mod general;
mod pc;
mod pfc;

pub use extended::{eval_extended_pfc_objective, fit_extended_pfc, fit_extended_pfc_from_moments, ExtendedPfcObjective};
pub use general::{fit_general_pfc, fit_general_pfc_known_delta, fit_ols, fit_sir};
pub use pc::{fit_extended_pc, fit_pc, fit_pc_between_class, signal_dominance_gap};
pub use pfc::fit_pfc_iso;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::linalg::Subspace;
use crate::moments::Dataset;

/// Which estimator produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Pc,
    ExtendedPc,
    PfcIso,
    ExtendedPfc,
    GeneralPfcKnownDelta,
    GeneralPfc,
    Sir,
    Ols,
    BernoulliPc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pc => "pc",
            Method::ExtendedPc => "xpc",
            Method::PfcIso => "pfc",
            Method::ExtendedPfc => "xpfc",
            Method::GeneralPfcKnownDelta => "gpfc-known-delta",
            Method::GeneralPfc => "gpfc",
            Method::Sir => "sir",
            Method::Ols => "ols",
            Method::BernoulliPc => "bpc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Search strategy for the extended PFC likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Evaluate all d-subsets of the sample PC directions.
    PfcPc,
    /// Evaluate all d-subsets of the pooled PC + PFC + RC directions.
    PfcAll,
    /// Greedy one-direction-at-a-time selection from the PC set.
    Sequential,
    /// Local Grassmann ascent started from the best pooled candidate.
    Grassmann,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::PfcPc => "pfc-pc",
            Strategy::PfcAll => "pfc-all",
            Strategy::Sequential => "sequential",
            Strategy::Grassmann => "grassmann",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pfc-pc" => Ok(Strategy::PfcPc),
            "pfc-all" => Ok(Strategy::PfcAll),
            "sequential" => Ok(Strategy::Sequential),
            "grassmann" => Ok(Strategy::Grassmann),
            _ => Err(Error::InvalidArgument(format!(
                "unknown strategy '{s}' (expected pfc-pc, pfc-all, sequential or grassmann)"
            ))),
        }
    }
}

/// Which candidate set supplied the winning directions of an extended fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSource {
    Pc,
    Pfc,
    Rc,
    GrassmannLocal,
    /// d > 1 winner drawing directions from more than one set.
    Mixed,
}

impl CandidateSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CandidateSource::Pc => "PC",
            CandidateSource::Pfc => "PFC",
            CandidateSource::Rc => "RC",
            CandidateSource::GrassmannLocal => "grassmann-local",
            CandidateSource::Mixed => "mixed",
        }
    }
}

impl fmt::Display for CandidateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Spectral detail recorded only for extended-model fits.
#[derive(Debug, Clone)]
pub struct ExtendedFitDetail {
    /// Omega^2 estimate: G^T Sigma_res G at the optimum.
    pub omega2_hat: DMatrix<f64>,
    /// Omega_0^2 estimate: G_0^T Sigma G_0 at the optimum.
    pub omega0_2_hat: DMatrix<f64>,
    pub candidate_source: CandidateSource,
}

/// Output of every fitting procedure.
///
/// `subspace` estimates the reductive subspace: S_Gamma for the PC/PFC
/// families, S_{Delta^{-1} Gamma} for the general models. `coordinate_map`
/// is the p x d matrix W whose transpose maps predictors to the reduction
/// W^T X; its span equals the subspace span.
#[derive(Debug, Clone)]
pub struct FittedReduction {
    pub method: Method,
    pub subspace: Subspace,
    pub coordinate_map: DMatrix<f64>,
    pub sigma2_hat: Option<f64>,
    pub delta_hat: Option<DMatrix<f64>>,
    /// Partially maximized log likelihood at the optimum, additive constants
    /// dropped consistently within each model family.
    pub loglik: f64,
    pub d: usize,
    pub r: usize,
    pub n: usize,
    pub p: usize,
    pub basis_kind: Option<BasisKind>,
    /// beta estimate (d x r) where the fit provides one.
    pub beta_hat: Option<DMatrix<f64>>,
    pub extended: Option<ExtendedFitDetail>,
    pub diagnostics: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl FittedReduction {
    /// Apply the reduction: rows of the result are W^T x for each row x.
    pub fn reduce(&self, xnew: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xnew.ncols() != self.p {
            return Err(Error::dim(format!(
                "reduce: fit expects p = {}, got {} columns",
                self.p,
                xnew.ncols()
            )));
        }
        Ok(xnew * &self.coordinate_map)
    }

    /// Serialize to the JSON fit document. Matrices are nested row arrays
    /// (row-major); field names are stable across runs.
    pub fn to_json(&self) -> Value {
        json!({
            "method": self.method.as_str(),
            "d": self.d,
            "r": self.r,
            "n": self.n,
            "p": self.p,
            "basis": self.basis_kind.map(|k| k.to_string()),
            "loglik": self.loglik,
            "sigma2_hat": self.sigma2_hat,
            "delta_hat": self.delta_hat.as_ref().map(matrix_rows),
            "subspace_basis": matrix_rows(self.subspace.basis()),
            "coordinate_map": matrix_rows(&self.coordinate_map),
            "beta_hat": self.beta_hat.as_ref().map(matrix_rows),
            "extended": self.extended.as_ref().map(|e| json!({
                "omega2_hat": matrix_rows(&e.omega2_hat),
                "omega0_2_hat": matrix_rows(&e.omega0_2_hat),
                "candidate_source": e.candidate_source.as_str(),
            })),
            "diagnostics": Value::Object(self.diagnostics.clone()),
            "warnings": self.warnings,
        })
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect()))
            .collect(),
    )
}

pub(crate) fn vector_json(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|x| json!(x)).collect())
}

/// Isotropic-family profile log likelihood: -(np/2) log s^2 -
/// (n/2s^2) * residual_trace, shared by the PC and PFC fits so their values
/// are directly comparable.
pub(crate) fn iso_loglik(n: usize, p: usize, s2: f64, residual_trace: f64) -> f64 {
    -(n as f64 * p as f64 / 2.0) * s2.ln() - n as f64 / (2.0 * s2) * residual_trace
}

/// Forward OLS of y on the reduced predictors, then evaluation on new rows.
///
/// Returns a + b^T (W^T x) for each row of `xnew`, with (a, b) from the
/// training data. For the OLS fit itself this reproduces ordinary
/// least-squares predictions (the forward slope on alpha_hat^T X is 1).
pub fn predict(
    fit: &FittedReduction,
    train: &Dataset,
    xnew: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let reduced = fit.reduce(&train.x)?;
    let n = train.n();
    let d = fit.d;
    let mut design = DMatrix::zeros(n, d + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..d {
            design[(i, j + 1)] = reduced[(i, j)];
        }
    }
    let gram = design.transpose() * &design;
    let coef = gram
        .try_inverse()
        .ok_or_else(|| Error::FitFailure("degenerate reduced regressor in forward fit".into()))?
        * design.transpose()
        * &train.y;

    let reduced_new = fit.reduce(xnew)?;
    let mut yhat = DVector::zeros(xnew.nrows());
    for i in 0..xnew.nrows() {
        let mut v = coef[0];
        for j in 0..d {
            v += coef[j + 1] * reduced_new[(i, j)];
        }
        yhat[i] = v;
    }
    Ok(yhat)
}
