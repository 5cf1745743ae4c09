//! Principal-component fits: the isotropic PC model and its extended
//! (heterogeneous-error) variant, which shares the same subspace estimate
//! but carries a signal-dominance diagnostic.

use nalgebra::DMatrix;
use serde_json::json;

use crate::basis::{BasisKind, BasisMatrix};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SPD_REL_TOL};
use crate::moments::{compute_moments, Dataset};

use super::pfc::pfc_from_moments;
use super::{iso_loglik, FittedReduction, Method};

fn check_pc_dims(p: usize, d: usize) -> Result<()> {
    if d < 1 || d >= p {
        return Err(Error::InvalidArgument(format!(
            "PC fit needs 1 <= d < p, got d = {d}, p = {p}"
        )));
    }
    Ok(())
}

/// Maximum likelihood fit of the isotropic PC model: the reductive subspace
/// is spanned by the first d sample PC directions and
/// sigma2_hat = sum_{j>d} lambda_j / p.
pub fn fit_pc(data: &Dataset, d: usize) -> Result<FittedReduction> {
    let p = data.p();
    let n = data.n();
    check_pc_dims(p, d)?;

    let sigma = data.sigma_hat();
    let eig = sym_eig(&sigma)?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::FitFailure("predictors have zero variance".into()));
    }
    let s2: f64 = eig.eigenvalues.iter().skip(d).sum::<f64>() / p as f64;
    if s2 <= 0.0 {
        return Err(Error::FitFailure(
            "residual variance is zero: predictors lie exactly in a d-dimensional subspace".into(),
        ));
    }
    let subspace = eig.leading_subspace(d)?;
    let loglik = iso_loglik(n, p, s2, p as f64 * s2);
    let coordinate_map = subspace.basis().clone();

    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("eigenvalues".into(), super::vector_json(&eig.eigenvalues));

    Ok(FittedReduction {
        method: Method::Pc,
        subspace,
        coordinate_map,
        sigma2_hat: Some(s2),
        delta_hat: None,
        loglik,
        d,
        r: 0,
        n,
        p,
        basis_kind: None,
        beta_hat: None,
        extended: None,
        diagnostics,
        warnings: vec![],
    })
}

/// PC fit for replicated responses: components are computed from the
/// between-class covariance of the unique response values. Equivalent to a
/// PFC fit whose slice basis indicates the distinct y's.
pub fn fit_pc_between_class(data: &Dataset, d: usize) -> Result<FittedReduction> {
    let n = data.n();
    check_pc_dims(data.p(), d)?;

    // group observations by identical response value
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.y[a].partial_cmp(&data.y[b]).expect("finite response"));
    let mut class_of = vec![0usize; n];
    let mut classes = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && data.y[i] != data.y[order[rank - 1]] {
            classes += 1;
        }
        class_of[i] = classes;
    }
    classes += 1;
    if classes < 2 {
        return Err(Error::DegenerateBasis(
            "between-class PC needs at least two distinct response values".into(),
        ));
    }
    let mut counts = vec![0usize; classes];
    for &c in &class_of {
        counts[c] += 1;
    }

    // full indicator basis, last class dropped, centered
    let f = DMatrix::from_fn(n, classes - 1, |i, k| {
        let ind = if class_of[i] == k { 1.0 } else { 0.0 };
        ind - counts[k] as f64 / n as f64
    });
    let basis = BasisMatrix {
        f,
        kind: BasisKind::Slices(classes),
        slice_assignments: Some(class_of),
        warnings: vec![],
    };
    let moments = compute_moments(data, &basis)?;
    let mut fit = pfc_from_moments(&moments, d)?;
    fit.method = Method::Pc;
    fit.basis_kind = None;
    fit.r = 0;
    fit.beta_hat = None;
    fit.diagnostics.insert("between_class".into(), json!(true));
    fit.diagnostics.insert("classes".into(), json!(classes));
    Ok(fit)
}

/// Eigengap diagnostic for the extended PC model: the smallest of the top-d
/// eigenvalues minus the largest of the remaining ones. Positive values mean
/// the signal dominates the noise and the PC span is trustworthy.
pub fn signal_dominance_gap(sigma: &DMatrix<f64>, d: usize) -> Result<f64> {
    let p = sigma.nrows();
    check_pc_dims(p, d)?;
    let eig = sym_eig(sigma)?;
    Ok(eig.eigenvalues[d - 1] - eig.eigenvalues[d])
}

/// Extended PC model fit. The subspace estimate is the same PC span as
/// [`fit_pc`]; the result is flagged with the signal-dominance diagnostic
/// because the span is reliable only when the signal eigenvalues dominate.
pub fn fit_extended_pc(data: &Dataset, d: usize) -> Result<FittedReduction> {
    let p = data.p();
    let n = data.n();
    check_pc_dims(p, d)?;

    let sigma = data.sigma_hat();
    let eig = sym_eig(&sigma)?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::FitFailure("predictors have zero variance".into()));
    }
    let subspace = eig.leading_subspace(d)?;
    let gap = eig.eigenvalues[d - 1] - eig.eigenvalues[d];

    // estimable part of the partially maximized likelihood:
    // -(n/2) log |G0' Sigma G0| = -(n/2) sum_{j>d} log lambda_j at the
    // optimum; the non-estimable |M| term is dropped
    let mut loglik = 0.0;
    for j in d..p {
        let lambda = eig.eigenvalues[j];
        if lambda <= p as f64 * SPD_REL_TOL * eig.eigenvalues[0] {
            loglik = f64::INFINITY;
            break;
        }
        loglik -= n as f64 / 2.0 * lambda.ln();
    }

    let mut warnings = vec![];
    if gap <= 0.0 {
        warnings.push(format!(
            "signal does not dominate noise (eigengap {gap:.3e} <= 0): the PC span is unreliable under the extended model"
        ));
    }
    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("signal_dominance_gap".into(), json!(gap));
    diagnostics.insert("eigenvalues".into(), super::vector_json(&eig.eigenvalues));

    let coordinate_map = subspace.basis().clone();
    Ok(FittedReduction {
        method: Method::ExtendedPc,
        subspace,
        coordinate_map,
        sigma2_hat: None,
        delta_hat: None,
        loglik,
        d,
        r: 0,
        n,
        p,
        basis_kind: None,
        beta_hat: None,
        extended: None,
        diagnostics,
        warnings,
    })
}
