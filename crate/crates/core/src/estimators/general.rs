//! General PFC models with unstructured conditional covariance Delta, plus
//! the SIR and OLS fits that arise as special cases. The reductive subspace
//! for this family is S_{Delta^{-1} Gamma}: the coordinate map standardizes
//! by Delta^{-1/2}, extracts eigenvectors there, and maps back.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::basis::{BasisKind, BasisMatrix};
use crate::error::{Error, Result};
use crate::linalg::{logdet, spd_power, sym_eig, Subspace, SPD_REL_TOL};
use crate::moments::{compute_moments, slice_mean_form, symmetrize, Dataset, MomentSet};

use super::{FittedReduction, Method};

struct StandardizedFit {
    w: DMatrix<f64>,
    subspace: Subspace,
    kernel_eigenvalues: DVector<f64>,
    loglik: f64,
}

/// Shared core: W = D^{-1/2} (top-d eigenvectors of D^{-1/2} Sigma_fit
/// D^{-1/2}), log likelihood from the profile form of the general model.
fn standardized_fit(m: &MomentSet, d: usize, delta: &DMatrix<f64>) -> Result<StandardizedFit> {
    let p = m.p;
    if delta.shape() != (p, p) {
        return Err(Error::dim(format!(
            "Delta is {}x{}, expected {p}x{p}",
            delta.nrows(),
            delta.ncols()
        )));
    }
    if d < 1 || d > p {
        return Err(Error::InvalidArgument(format!(
            "general PFC needs 1 <= d <= p, got d = {d}, p = {p}"
        )));
    }
    let delta_inv_half = spd_power(delta, -0.5).map_err(|e| match e {
        Error::RankDeficient { eigenvalue, .. } => Error::NotPositiveDefinite {
            min_eigenvalue: eigenvalue,
        },
        other => other,
    })?;
    let kernel = symmetrize(&delta_inv_half * &m.sigma_fit * &delta_inv_half);
    let eig = sym_eig(&kernel)?;
    // scale for the rank check: total standardized variance per coordinate
    let delta_inv = &delta_inv_half * &delta_inv_half;
    let scale = ((&delta_inv * &m.sigma_hat).trace() / p as f64).max(eig.eigenvalues[0].max(0.0));
    let threshold = p as f64 * SPD_REL_TOL * scale;
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > threshold && l > 0.0)
        .count();
    if rank < d {
        return Err(Error::RankDeficient {
            eigenvalue: eig.eigenvalues[d - 1],
            threshold,
        });
    }
    let u = eig.eigenvectors.columns(0, d).into_owned();
    let w = &delta_inv_half * u;
    let subspace = Subspace::from_span(&w)?;

    // profile log likelihood of the general model at (Delta, top-d span):
    // -(n/2) log|Delta| - (n/2){trace(Delta^{-1} Sigma) - sum_{i<=d} lambda_i}
    let n = m.n as f64;
    let explained: f64 = eig.eigenvalues.iter().take(d).sum();
    let loglik = match logdet(delta) {
        Ok(ld) => -(n / 2.0) * ld - (n / 2.0) * ((&delta_inv * &m.sigma_hat).trace() - explained),
        Err(_) => f64::INFINITY,
    };

    Ok(StandardizedFit {
        w,
        subspace,
        kernel_eigenvalues: eig.eigenvalues,
        loglik,
    })
}

/// General PFC fit with known conditional covariance Delta. The reduction
/// W^T X targets S_{Delta^{-1} Gamma}.
pub fn fit_general_pfc_known_delta(
    data: &Dataset,
    basis: &BasisMatrix,
    d: usize,
    delta: &DMatrix<f64>,
) -> Result<FittedReduction> {
    let m = compute_moments(data, basis)?;
    let core = standardized_fit(&m, d, delta)?;

    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert(
        "kernel_eigenvalues".into(),
        super::vector_json(&core.kernel_eigenvalues),
    );

    Ok(FittedReduction {
        method: Method::GeneralPfcKnownDelta,
        subspace: core.subspace,
        coordinate_map: core.w,
        sigma2_hat: None,
        delta_hat: Some(delta.clone()),
        loglik: core.loglik,
        d,
        r: m.r,
        n: m.n,
        p: m.p,
        basis_kind: Some(basis.kind),
        beta_hat: None,
        extended: None,
        diagnostics,
        warnings: basis.warnings.clone(),
    })
}

/// General PFC fit with Delta estimated by Sigma_res. Carries the overfit
/// diagnostic sum_{i>d} lambda_i(Delta_hat^{-1} Sigma_fit), which vanishes
/// when r = d and warns when r is substantially larger than d.
pub fn fit_general_pfc(data: &Dataset, basis: &BasisMatrix, d: usize) -> Result<FittedReduction> {
    let m = compute_moments(data, basis)?;
    general_pfc_from_moments(&m, d, Some(basis.kind), &basis.warnings)
}

pub(crate) fn general_pfc_from_moments(
    m: &MomentSet,
    d: usize,
    basis_kind: Option<BasisKind>,
    basis_warnings: &[String],
) -> Result<FittedReduction> {
    if m.n <= m.p {
        return Err(Error::FitFailure(format!(
            "general PFC needs n > p for Sigma_res to be positive definite (n = {}, p = {})",
            m.n, m.p
        )));
    }
    let core = standardized_fit(m, d, &m.sigma_res)?;

    let overfit: f64 = core.kernel_eigenvalues.iter().skip(d).sum();
    let mut warnings: Vec<String> = basis_warnings.to_vec();
    if m.r > 2 * d {
        warnings.push(format!(
            "r = {} is substantially larger than d = {d}: Delta_hat = Sigma_res ignores an \
             overfitting term of {overfit:.4}",
            m.r
        ));
    }
    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("overfit_term".into(), json!(overfit));
    diagnostics.insert(
        "kernel_eigenvalues".into(),
        super::vector_json(&core.kernel_eigenvalues),
    );

    Ok(FittedReduction {
        method: Method::GeneralPfc,
        subspace: core.subspace,
        coordinate_map: core.w,
        sigma2_hat: None,
        delta_hat: Some(m.sigma_res.clone()),
        loglik: core.loglik,
        d,
        r: m.r,
        n: m.n,
        p: m.p,
        basis_kind,
        beta_hat: None,
        extended: None,
        diagnostics,
        warnings,
    })
}

/// Sliced inverse regression: eigenanalysis of the standardized kernel
/// Sigma^{-1/2} Sigma_fit Sigma^{-1/2} on an h-slice basis, back-transformed
/// by Sigma^{-1/2}.
pub fn fit_sir(data: &Dataset, h: usize, d: usize) -> Result<FittedReduction> {
    let n = data.n();
    let p = data.p();
    if n <= p {
        return Err(Error::FitFailure(format!(
            "SIR needs n > p (n = {n}, p = {p})"
        )));
    }
    if h < d + 1 {
        return Err(Error::InvalidArgument(format!(
            "SIR needs h >= d + 1 slices (h = {h}, d = {d})"
        )));
    }
    let m = slice_mean_form(data, h)?;
    let sigma_inv_half = spd_power(&m.sigma_hat, -0.5).map_err(|e| match e {
        Error::RankDeficient { eigenvalue, .. } => Error::NotPositiveDefinite {
            min_eigenvalue: eigenvalue,
        },
        other => other,
    })?;
    let kernel = symmetrize(&sigma_inv_half * &m.sigma_fit * &sigma_inv_half);
    let eig = sym_eig(&kernel)?;
    let u = eig.eigenvectors.columns(0, d).into_owned();
    let w = &sigma_inv_half * u;
    let subspace = Subspace::from_span(&w)?;

    let r = m.r;
    let mut warnings = Vec::new();
    if eig.eigenvalues[0] < 2.0 * r as f64 / n as f64 {
        warnings.push(format!(
            "weak signal: leading SIR eigenvalue {:.4e} is below 2r/n = {:.4e}; the subspace \
             estimate is close to arbitrary",
            eig.eigenvalues[0],
            2.0 * r as f64 / n as f64
        ));
    }

    // likelihood in the Sigma inner product: -(n/2) sum_{i<=d} log(1 - lambda_i)
    let mut loglik = 0.0;
    for i in 0..d {
        let l = eig.eigenvalues[i];
        if l >= 1.0 {
            loglik = f64::INFINITY;
            break;
        }
        loglik -= n as f64 / 2.0 * (1.0 - l).ln();
    }

    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("sir_eigenvalues".into(), super::vector_json(&eig.eigenvalues));
    diagnostics.insert("slices".into(), json!(h));

    Ok(FittedReduction {
        method: Method::Sir,
        subspace,
        coordinate_map: w,
        sigma2_hat: None,
        delta_hat: None,
        loglik,
        d,
        r,
        n,
        p,
        basis_kind: Some(BasisKind::Slices(h)),
        beta_hat: None,
        extended: None,
        diagnostics,
        warnings,
    })
}

/// OLS of y on X with intercept, viewed as the d = 1 reduction
/// span(alpha_hat) = span(Sigma^{-1} C_hat) of the general PFC model with
/// f_y = y - ybar.
pub fn fit_ols(data: &Dataset) -> Result<FittedReduction> {
    let n = data.n();
    let p = data.p();
    if n <= p + 1 {
        return Err(Error::FitFailure(format!(
            "OLS needs n > p + 1 (n = {n}, p = {p})"
        )));
    }
    let sigma = data.sigma_hat();
    let sigma_inv = spd_power(&sigma, -1.0).map_err(|e| match e {
        Error::RankDeficient { eigenvalue, .. } => Error::FitFailure(format!(
            "singular design: smallest covariance eigenvalue {eigenvalue:e}"
        )),
        other => other,
    })?;

    let centered = data.centered();
    let ybar = data.y.mean();
    let ycent = DVector::from_fn(n, |i, _| data.y[i] - ybar);
    let c_hat = centered.transpose() * &ycent / n as f64;
    let sigma_y2 = ycent.dot(&ycent) / n as f64;
    if sigma_y2 <= 0.0 {
        return Err(Error::FitFailure("response has zero variance".into()));
    }
    let alpha = &sigma_inv * &c_hat;
    if alpha.norm() == 0.0 {
        return Err(Error::FitFailure("OLS coefficient vector is exactly zero".into()));
    }
    let subspace = Subspace::from_span(&DMatrix::from_column_slice(p, 1, alpha.as_slice()))?;
    let intercept = ybar - alpha.dot(&data.xbar());

    // loglik of the general family at Delta_hat = Sigma_res, d = r = 1
    // (no overfit term): -(n/2) log|Sigma_res| - (n/2) p
    let sigma_res = symmetrize(&sigma - &c_hat * c_hat.transpose() / sigma_y2);
    let loglik = match logdet(&sigma_res) {
        Ok(ld) => -(n as f64 / 2.0) * ld - n as f64 / 2.0 * p as f64,
        Err(_) => f64::INFINITY, // exact linear fit
    };

    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("alpha_hat".into(), super::vector_json(&alpha));
    diagnostics.insert("cov_xy".into(), super::vector_json(&c_hat));
    diagnostics.insert("sigma_y2".into(), json!(sigma_y2));
    diagnostics.insert("intercept".into(), json!(intercept));

    Ok(FittedReduction {
        method: Method::Ols,
        subspace,
        coordinate_map: DMatrix::from_column_slice(p, 1, alpha.as_slice()),
        sigma2_hat: None,
        delta_hat: None,
        loglik,
        d: 1,
        r: 1,
        n,
        p,
        basis_kind: Some(BasisKind::Linear),
        beta_hat: None,
        extended: None,
        diagnostics,
        warnings: vec![],
    })
}
