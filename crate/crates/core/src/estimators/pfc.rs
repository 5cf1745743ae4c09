//! Isotropic principal fitted components: the maximum likelihood fit of the
//! inverse model with mean mu + Gamma beta f_y and error sigma^2 I_p.

use serde_json::json;

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SPD_REL_TOL};
use crate::moments::{compute_moments, Dataset, MomentSet};

use super::{iso_loglik, FittedReduction, Method};

/// Core of the PFC fit, shared with the between-class PC path: subspace from
/// the top-d eigenvectors of Sigma_fit, scale from the leftover spectrum.
pub(crate) fn pfc_from_moments(m: &MomentSet, d: usize) -> Result<FittedReduction> {
    let p = m.p;
    let n = m.n;
    if d < 1 || d > p {
        return Err(Error::InvalidArgument(format!(
            "PFC fit needs 1 <= d <= p, got d = {d}, p = {p}"
        )));
    }
    let eig_sigma = sym_eig(&m.sigma_hat)?;
    let eig_fit = sym_eig(&m.sigma_fit)?;
    // rank threshold is relative to the overall predictor scale, so a
    // basis-orthogonal signal (Sigma_fit = numerical dust) counts as rank 0
    let scale = eig_sigma.eigenvalues[0].max(0.0);
    let threshold = p as f64 * SPD_REL_TOL * scale;
    let rank = eig_fit
        .eigenvalues
        .iter()
        .filter(|&&l| l > threshold && l > 0.0)
        .count();
    if rank < d {
        return Err(Error::RankDeficient {
            eigenvalue: eig_fit.eigenvalues[d - 1],
            threshold,
        });
    }

    let total: f64 = eig_sigma.eigenvalues.iter().sum();
    let explained: f64 = eig_fit.eigenvalues.iter().take(d).sum();
    let s2 = (total - explained) / p as f64;
    if s2 <= 0.0 {
        return Err(Error::FitFailure(
            "residual variance is zero under the isotropic PFC model".into(),
        ));
    }
    let subspace = eig_fit.leading_subspace(d)?;
    let loglik = iso_loglik(n, p, s2, p as f64 * s2);
    let coordinate_map = subspace.basis().clone();

    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("fit_eigenvalues".into(), super::vector_json(&eig_fit.eigenvalues));
    diagnostics.insert("rank_sigma_fit".into(), json!(rank));

    Ok(FittedReduction {
        method: Method::PfcIso,
        subspace,
        coordinate_map,
        sigma2_hat: Some(s2),
        delta_hat: None,
        loglik,
        d,
        r: m.r,
        n,
        p,
        basis_kind: None,
        beta_hat: None,
        extended: None,
        diagnostics,
        warnings: vec![],
    })
}

/// Isotropic PFC fit: the reduction is spanned by the first d eigenvectors
/// of Sigma_fit, with sigma2_hat = (sum_i lambda_i - sum_{i<=d}
/// lambda_i^fit)/p and beta_hat = G' X' F (F'F)^{-1}.
pub fn fit_pfc_iso(data: &Dataset, basis: &BasisMatrix, d: usize) -> Result<FittedReduction> {
    let moments = compute_moments(data, basis)?;
    let mut fit = pfc_from_moments(&moments, d)?;
    fit.basis_kind = Some(basis.kind);
    fit.warnings.extend(basis.warnings.iter().cloned());

    // beta_hat = G' X' F (F'F)^{-1}, via the QR factor of F
    let centered = data.centered();
    let qr = basis.f.clone().qr();
    let r_mat = qr.r();
    let q = qr.q();
    let gt_xt_q = fit.subspace.basis().transpose() * centered.transpose() * &q; // d x r
    // solve beta * R^T = gt_xt_q  =>  R beta^T = gt_xt_q^T
    let beta_t = r_mat
        .solve_upper_triangular(&gt_xt_q.transpose())
        .ok_or_else(|| Error::DegenerateBasis("F^T F is singular".into()))?;
    fit.beta_hat = Some(beta_t.transpose());
    Ok(fit)
}
