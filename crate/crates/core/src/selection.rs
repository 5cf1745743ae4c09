//! Likelihood-ratio inference on the reductive dimension d.
//!
//! With d = p the extended PFC model becomes the full multivariate linear
//! model X_y = mu + beta f_y + Omega eps, whose maximized log likelihood is
//! -(n/2) log |Sigma_res| up to the constants shared with the extended-PFC
//! likelihood. Lambda_d = 2(loglik_full - loglik_pfc(d)) is referred to a
//! chi-squared distribution with r(p - d) degrees of freedom.
//!
//! Both log likelihoods are computed with the same dropped-constant
//! convention and the same /n covariance divisor; this consistency is what
//! makes Lambda_d constant-free and it is pinned by a regression test.

use serde_json::json;

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::estimators::{fit_extended_pfc_from_moments, FittedReduction, Strategy};
use crate::linalg::logdet;
use crate::moments::{compute_moments, Dataset, MomentSet};
use crate::prob;

/// One likelihood-ratio test of dimension d against the full model.
#[derive(Debug, Clone)]
pub struct DimensionTest {
    pub d: usize,
    /// -2 log likelihood ratio.
    pub lambda: f64,
    /// Degrees of freedom r(p - d).
    pub df: usize,
    pub p_value: f64,
}

/// Row of the selection table: the test plus penalized-likelihood scores.
#[derive(Debug, Clone)]
pub struct SelectionRow {
    pub test: DimensionTest,
    /// Parameter count d r + d(p - d) + p(p + 1)/2 used by the penalties.
    pub npar: usize,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
    /// Smallest non-rejected d (p when every d < p is rejected).
    pub chosen_d: usize,
    pub alpha: f64,
}

impl SelectionTable {
    /// CSV representation: d, Lambda, df, p_value, AIC, BIC.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,Lambda,df,p_value,AIC,BIC\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.test.d, row.test.lambda, row.test.df, row.test.p_value, row.aic, row.bic
            ));
        }
        out
    }
}

/// Upper-tail chi-squared probability via the regularized incomplete gamma.
pub fn chisq_sf(x: f64, df: usize) -> Result<f64> {
    if df < 1 {
        return Err(Error::InvalidArgument("chi-squared needs df >= 1".into()));
    }
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "chi-squared statistic must be nonnegative, got {x}"
        )));
    }
    prob::reg_upper_gamma(df as f64 / 2.0, x / 2.0)
}

/// Maximized log likelihood of the full model, -(n/2) log |Sigma_res|,
/// with constants matching the extended-PFC likelihood.
pub fn loglik_full(data: &Dataset, basis: &BasisMatrix) -> Result<f64> {
    let m = compute_moments(data, basis)?;
    loglik_full_from_moments(&m)
}

pub fn loglik_full_from_moments(m: &MomentSet) -> Result<f64> {
    if m.n <= m.p + m.r {
        return Err(Error::FitFailure(format!(
            "full model needs n > p + r (n = {}, p = {}, r = {})",
            m.n, m.p, m.r
        )));
    }
    Ok(-(m.n as f64) / 2.0 * logdet(&m.sigma_res)?)
}

/// The likelihood-ratio test of the d-dimensional extended PFC model
/// against the full model. Maximization uses the Grassmann strategy seeded
/// from the pooled candidate set.
pub fn lrt_dimension(data: &Dataset, basis: &BasisMatrix, d: usize) -> Result<DimensionTest> {
    let m = compute_moments(data, basis)?;
    lrt_from_moments(&m, d).map(|(t, _)| t)
}

fn lrt_from_moments(m: &MomentSet, d: usize) -> Result<(DimensionTest, f64)> {
    let p = m.p;
    let r = m.r;
    let full = loglik_full_from_moments(m)?;
    if d == p {
        // the d = p model is the full model; Lambda is identically zero
        return Ok((
            DimensionTest {
                d,
                lambda: 0.0,
                df: 0,
                p_value: 1.0,
            },
            full,
        ));
    }
    let fit = fit_extended_pfc_from_moments(m, d, Strategy::Grassmann)?;
    let lambda = 2.0 * (full - fit.loglik);
    let df = r * (p - d);
    let p_value = chisq_sf(lambda.max(0.0), df)?;
    Ok((
        DimensionTest {
            d,
            lambda,
            df,
            p_value,
        },
        fit.loglik,
    ))
}

/// Test d = 1, 2, ... in order and choose the smallest non-rejected
/// dimension at level `alpha`. The table carries every computed test plus
/// AIC/BIC scores with npar = d r + d(p - d) + p(p + 1)/2.
pub fn select_d(data: &Dataset, basis: &BasisMatrix, alpha: f64) -> Result<SelectionTable> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0, 1], got {alpha}"
        )));
    }
    let m = compute_moments(data, basis)?;
    let p = m.p;
    let r = m.r;
    let n = m.n as f64;

    let mut rows = Vec::new();
    let mut chosen = p;
    for d in 1..=p {
        let (test, loglik) = lrt_from_moments(&m, d)?;
        let npar = d * r + d * (p - d) + p * (p + 1) / 2;
        let (aic, bic) = if loglik.is_finite() {
            (
                -2.0 * loglik + 2.0 * npar as f64,
                -2.0 * loglik + n.ln() * npar as f64,
            )
        } else {
            (f64::NEG_INFINITY, f64::NEG_INFINITY)
        };
        let accept = test.p_value > alpha;
        rows.push(SelectionRow {
            test,
            npar,
            aic,
            bic,
        });
        if accept {
            chosen = d;
            break;
        }
    }
    Ok(SelectionTable {
        rows,
        chosen_d: chosen,
        alpha,
    })
}

/// JSON form of the table, used by the CLI manifest.
pub fn table_json(table: &SelectionTable) -> serde_json::Value {
    json!({
        "alpha": table.alpha,
        "chosen_d": table.chosen_d,
        "rows": table.rows.iter().map(|r| json!({
            "d": r.test.d,
            "Lambda": r.test.lambda,
            "df": r.test.df,
            "p_value": r.test.p_value,
            "npar": r.npar,
            "AIC": r.aic,
            "BIC": r.bic,
        })).collect::<Vec<_>>(),
    })
}

/// The extended-PFC fit behind a given Lambda_d, for callers that want the
/// estimated reduction along with the test.
pub fn fit_for_dimension(data: &Dataset, basis: &BasisMatrix, d: usize) -> Result<FittedReduction> {
    let m = compute_moments(data, basis)?;
    fit_extended_pfc_from_moments(&m, d, Strategy::Grassmann)
}
