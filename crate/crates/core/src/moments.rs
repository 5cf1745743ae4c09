//! Sample moment matrices: the marginal covariance Sigma_hat, the covariance
//! Sigma_fit of fitted values from the inverse regression of X on f_y, and
//! the residual covariance Sigma_res = Sigma_hat - Sigma_fit.
//!
//! All covariances use divisor n (not n-1) because the likelihood
//! expressions they feed are stated with /n.

use nalgebra::{DMatrix, DVector};

use crate::basis::{build_basis, BasisKind, BasisMatrix};
use crate::error::{Error, Result};

/// An n x p predictor matrix paired with an n-vector response.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::with_names(x, y, None)
    }

    pub fn with_names(
        x: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dim(format!(
                "dataset: X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidArgument("dataset needs at least 2 observations".into()));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains non-finite values".into()));
        }
        if let Some(names) = &column_names {
            if names.len() != x.ncols() {
                return Err(Error::dim(format!(
                    "dataset: {} column names for {} columns",
                    names.len(),
                    x.ncols()
                )));
            }
        }
        Ok(Dataset { x, y, column_names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Column means of X.
    pub fn xbar(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_fn(self.p(), |j, _| self.x.column(j).sum() / n)
    }

    /// X with column means removed (rows are (X_y - Xbar)^T).
    pub fn centered(&self) -> DMatrix<f64> {
        let xbar = self.xbar();
        let mut c = self.x.clone();
        for j in 0..self.p() {
            let m = xbar[j];
            for i in 0..self.n() {
                c[(i, j)] -= m;
            }
        }
        c
    }

    /// Marginal sample covariance X'X/n of the centered predictors.
    pub fn sigma_hat(&self) -> DMatrix<f64> {
        let c = self.centered();
        symmetrize(c.transpose() * &c / self.n() as f64)
    }
}

/// Sigma_hat, Sigma_fit, Sigma_res plus the pieces needed to rebuild them.
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub sigma_hat: DMatrix<f64>,
    pub sigma_fit: DMatrix<f64>,
    pub sigma_res: DMatrix<f64>,
    pub xbar: DVector<f64>,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    /// Slice means Xbar_k, present when built via [`slice_mean_form`].
    pub slice_means: Option<Vec<DVector<f64>>>,
    /// Slice weights n_k/n, parallel to `slice_means`.
    pub slice_weights: Option<Vec<f64>>,
}

impl MomentSet {
    /// Assemble a MomentSet from externally supplied matrices (used for
    /// population-level analyses where the limits are known in closed form).
    /// `n` only scales log-likelihood values computed from the set.
    pub fn from_parts(
        sigma_hat: DMatrix<f64>,
        sigma_fit: DMatrix<f64>,
        n: usize,
        r: usize,
    ) -> Result<Self> {
        let p = sigma_hat.nrows();
        if sigma_fit.shape() != (p, p) || sigma_hat.ncols() != p {
            return Err(Error::dim("moment matrices must be square and conformable"));
        }
        let sigma_res = symmetrize(&sigma_hat - &sigma_fit);
        Ok(MomentSet {
            sigma_hat: symmetrize(sigma_hat),
            sigma_fit: symmetrize(sigma_fit),
            sigma_res,
            xbar: DVector::zeros(p),
            n,
            p,
            r,
            slice_means: None,
            slice_weights: None,
        })
    }
}

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    0.5 * (m + t)
}

/// Thin Q factor of F, rejecting rank-deficient bases.
fn basis_q(f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = f.ncols();
    let qr = f.clone().qr();
    let rr = qr.r();
    let max_diag = (0..r).map(|i| rr[(i, i)].abs()).fold(0.0f64, f64::max);
    for i in 0..r {
        if max_diag == 0.0 || rr[(i, i)].abs() <= max_diag * 1e-12 {
            return Err(Error::DegenerateBasis(format!(
                "F^T F is singular: column {i} of F is linearly dependent"
            )));
        }
    }
    Ok(qr.q().columns(0, r).into_owned())
}

/// Sample moments for a dataset under a basis matrix.
///
/// Sigma_hat = X'X/n on centered X; Sigma_fit projects the centered X onto
/// the column space of F before forming the covariance (computed through the
/// QR factor of F rather than an explicit (F'F)^{-1}).
pub fn compute_moments(data: &Dataset, basis: &BasisMatrix) -> Result<MomentSet> {
    let n = data.n();
    let p = data.p();
    if basis.n() != n {
        return Err(Error::dim(format!(
            "basis has {} rows but dataset has {n} observations",
            basis.n()
        )));
    }
    let r = basis.r();
    let centered = data.centered();
    let sigma_hat = symmetrize(centered.transpose() * &centered / n as f64);

    let q = basis_q(&basis.f)?;
    let qt_x = q.transpose() * &centered; // r x p
    let sigma_fit = symmetrize(qt_x.transpose() * &qt_x / n as f64);
    let sigma_res = symmetrize(&sigma_hat - &sigma_fit);

    Ok(MomentSet {
        sigma_hat,
        sigma_fit,
        sigma_res,
        xbar: data.xbar(),
        n,
        p,
        r,
        slice_means: None,
        slice_weights: None,
    })
}

/// Slice-mean construction of the same moment set: Sigma_fit equals the
/// weighted covariance of the slice means Xbar_k. Identical (to rounding) to
/// `compute_moments` with the h-slice basis; this entry point additionally
/// exposes the slice means and weights.
pub fn slice_mean_form(data: &Dataset, h: usize) -> Result<MomentSet> {
    let basis = build_basis(&data.y, BasisKind::Slices(h))?;
    let mut moments = compute_moments(data, &basis)?;

    let assign = basis
        .slice_assignments
        .as_ref()
        .expect("slice basis always records assignments");
    let n = data.n();
    let p = data.p();
    let mut counts = vec![0usize; h];
    let mut means = vec![DVector::<f64>::zeros(p); h];
    for i in 0..n {
        counts[assign[i]] += 1;
        means[assign[i]] += data.x.row(i).transpose();
    }
    for (k, (mean, &count)) in means.iter_mut().zip(&counts).enumerate() {
        if count == 0 {
            return Err(Error::EmptySlice { index: k, h });
        }
        *mean /= count as f64;
    }
    moments.slice_weights = Some(counts.iter().map(|&c| c as f64 / n as f64).collect());
    moments.slice_means = Some(means);
    Ok(moments)
}
