//! Dense symmetric linear algebra and subspace geometry.
//!
//! Everything here is sized for desk-scale problems (p up to ~100). The
//! eigensolver is a cyclic Jacobi iteration with a fixed sweep order so that
//! results are reproducible on a given platform.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold below which a symmetric matrix is declared not
/// positive definite: lambda_min <= p * 1e-12 * lambda_max.
pub const SPD_REL_TOL: f64 = 1e-12;

const SYMMETRY_REL_TOL: f64 = 1e-10;
const MAX_JACOBI_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
///
/// Column `j` of `eigenvectors` pairs with `eigenvalues[j]`. Under eigenvalue
/// multiplicity only the invariant subspaces are determined; individual
/// eigenvectors are reported in a stable order (ties keep the original
/// column index) with a deterministic sign (the largest-magnitude entry of
/// each vector is positive).
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEig {
    /// V diag(f(lambda)) V^T.
    pub fn map_rebuild(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let p = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..p {
            let w = f(self.eigenvalues[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        &scaled * self.eigenvectors.transpose()
    }

    /// Span of the first `d` eigenvectors.
    pub fn leading_subspace(&self, d: usize) -> Result<Subspace> {
        let p = self.eigenvalues.len();
        if d == 0 || d > p {
            return Err(Error::dim(format!("leading_subspace: d={d} out of 1..={p}")));
        }
        Subspace::from_orthonormal(self.eigenvectors.columns(0, d).into_owned())
    }
}

/// A point on the Grassmann manifold: a p x d orthonormal basis identified
/// only up to its span. Two subspaces are considered equal when their spans
/// agree (largest principal angle below a tolerance), never by element-wise
/// comparison of bases.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wrap a matrix that is already orthonormal (B^T B = I_d to 1e-12).
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let (p, d) = basis.shape();
        if d == 0 || d > p {
            return Err(Error::dim(format!("subspace dimension d={d} out of 1..={p}")));
        }
        let gram = basis.transpose() * &basis;
        let mut max_dev = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((gram[(i, j)] - target).abs());
            }
        }
        if max_dev > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis is not orthonormal: max |B^T B - I| = {max_dev:e}"
            )));
        }
        Ok(Subspace { basis })
    }

    /// Orthonormalize the span of an arbitrary full-column-rank matrix.
    pub fn from_span(m: &DMatrix<f64>) -> Result<Self> {
        let (p, d) = m.shape();
        if d == 0 || d > p {
            return Err(Error::dim(format!("span dimension d={d} out of 1..={p}")));
        }
        let qr = m.clone().qr();
        let r = qr.r();
        let max_diag = (0..d).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
        for i in 0..d {
            if r[(i, i)].abs() <= max_diag * 1e-13 || max_diag == 0.0 {
                return Err(Error::RankDeficient {
                    eigenvalue: r[(i, i)].abs(),
                    threshold: max_diag * 1e-13,
                });
            }
        }
        Subspace::from_orthonormal(qr.q().columns(0, d).into_owned())
    }

    /// Convenience constructor for the span of the listed coordinate axes.
    pub fn coordinate_axes(p: usize, axes: &[usize]) -> Result<Self> {
        let mut b = DMatrix::zeros(p, axes.len());
        for (j, &axis) in axes.iter().enumerate() {
            if axis >= p {
                return Err(Error::dim(format!("axis {axis} out of range for p={p}")));
            }
            b[(axis, j)] = 1.0;
        }
        Subspace::from_orthonormal(b)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Ambient dimension p.
    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension d.
    pub fn d(&self) -> usize {
        self.basis.ncols()
    }

    /// Span equality: largest principal angle below `tol_degrees`.
    pub fn same_span(&self, other: &Subspace, tol_degrees: f64) -> bool {
        matches!(subspace_angle(self, other), Ok(a) if a < tol_degrees)
    }

    /// Projection matrix B B^T onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

fn check_square_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let p = a.nrows();
    if a.ncols() != p {
        return Err(Error::dim(format!("expected square matrix, got {}x{}", p, a.ncols())));
    }
    let mut max_abs = 0.0f64;
    let mut max_asym = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            max_abs = max_abs.max(a[(i, j)].abs());
            if j > i {
                max_asym = max_asym.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
    }
    if max_asym > SYMMETRY_REL_TOL * max_abs.max(1.0) {
        return Err(Error::NotSymmetric { max_asym });
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// The sweep order is fixed (upper triangle, row major), convergence is on
/// the off-diagonal Frobenius norm, and the returned decomposition follows
/// the ordering and sign conventions documented on [`SymEig`].
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEig> {
    check_square_symmetric(a)?;
    let p = a.nrows();
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut v = DMatrix::<f64>::identity(p, p);
    let frob = m.norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..p {
            for j in (i + 1)..p {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= 1e-15 * frob {
            break;
        }
        for i in 0..p.saturating_sub(1) {
            for j in (i + 1)..p {
                let a_ij = m[(i, j)];
                if a_ij == 0.0 {
                    continue;
                }
                let a_ii = m[(i, i)];
                let a_jj = m[(j, j)];
                let tau = (a_jj - a_ii) / (2.0 * a_ij);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                m[(i, i)] = a_ii - t * a_ij;
                m[(j, j)] = a_jj + t * a_ij;
                m[(i, j)] = 0.0;
                m[(j, i)] = 0.0;
                for k in 0..p {
                    if k == i || k == j {
                        continue;
                    }
                    let a_ki = m[(k, i)];
                    let a_kj = m[(k, j)];
                    m[(k, i)] = c * a_ki - s * a_kj;
                    m[(i, k)] = m[(k, i)];
                    m[(k, j)] = s * a_ki + c * a_kj;
                    m[(j, k)] = m[(k, j)];
                }
                for k in 0..p {
                    let v_ki = v[(k, i)];
                    let v_kj = v[(k, j)];
                    v[(k, i)] = c * v_ki - s * v_kj;
                    v[(k, j)] = s * v_ki + c * v_kj;
                }
            }
        }
    }

    // Stable descending sort keeps the original column order under ties.
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| m[(y, y)].partial_cmp(&m[(x, x)]).expect("finite eigenvalues"));

    let mut eigenvalues = DVector::zeros(p);
    let mut eigenvectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = m[(src, src)];
        eigenvectors.column_mut(dst).copy_from(&v.column(src));
    }

    // Sign convention: largest-magnitude entry of each eigenvector positive.
    for j in 0..p {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..p {
            let abs = eigenvectors[(i, j)].abs();
            if abs > best_abs {
                best_abs = abs;
                best = i;
            }
        }
        if eigenvectors[(best, j)] < 0.0 {
            eigenvectors.column_mut(j).neg_mut();
        }
    }

    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

fn spd_eig(a: &DMatrix<f64>) -> Result<SymEig> {
    let eig = sym_eig(a)?;
    let p = a.nrows();
    let lambda_max = eig.eigenvalues[0];
    let lambda_min = eig.eigenvalues[p - 1];
    let threshold = p as f64 * SPD_REL_TOL * lambda_max.max(0.0);
    if lambda_max <= 0.0 || lambda_min <= threshold {
        return Err(Error::RankDeficient {
            eigenvalue: lambda_min,
            threshold,
        });
    }
    Ok(eig)
}

/// Symmetric power A^e = V diag(lambda^e) V^T of an SPD matrix.
///
/// Intended for e in {-1, -1/2, 1/2}; near-singular input is rejected with
/// the offending eigenvalue.
pub fn spd_power(a: &DMatrix<f64>, exponent: f64) -> Result<DMatrix<f64>> {
    let eig = spd_eig(a)?;
    Ok(eig.map_rebuild(|l| l.powf(exponent)))
}

/// log |A| for SPD A, computed as the sum of log eigenvalues.
pub fn logdet(a: &DMatrix<f64>) -> Result<f64> {
    let eig = sym_eig(a)?;
    let p = a.nrows();
    let lambda_max = eig.eigenvalues[0];
    let lambda_min = eig.eigenvalues[p - 1];
    if lambda_max <= 0.0 || lambda_min <= p as f64 * SPD_REL_TOL * lambda_max {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lambda_min,
        });
    }
    Ok(eig.eigenvalues.iter().map(|l| l.ln()).sum())
}

/// Orthonormal completion: a basis of the orthogonal complement, so that
/// `[S, completion]` is a p x p orthogonal matrix. Built from the QR
/// factorization of `[S | I_p]` (no pivoting), hence deterministic for a
/// fixed input basis.
pub fn orthonormal_completion(s: &Subspace) -> Result<Subspace> {
    let p = s.p();
    let d = s.d();
    if d == p {
        return Err(Error::EmptyCompletion { p });
    }
    let mut aug = DMatrix::zeros(p, d + p);
    aug.view_mut((0, 0), (p, d)).copy_from(s.basis());
    for i in 0..p {
        aug[(i, d + i)] = 1.0;
    }
    let q = aug.qr().q();
    Subspace::from_orthonormal(q.columns(d, p - d).into_owned())
}

/// Largest principal angle between two subspaces of equal dimension, in
/// degrees (0 to 90). For d = 1 this is the acute angle between lines.
///
/// Small angles are computed through the sine (singular values of
/// (I - P1) B2) and large ones through the cosine (singular values of
/// B1^T B2), so both ends of the range stay accurate.
pub fn subspace_angle(s1: &Subspace, s2: &Subspace) -> Result<f64> {
    if s1.p() != s2.p() {
        return Err(Error::dim(format!(
            "subspace_angle: ambient dimensions differ ({} vs {})",
            s1.p(),
            s2.p()
        )));
    }
    if s1.d() != s2.d() {
        return Err(Error::dim(format!(
            "subspace_angle: subspace dimensions differ ({} vs {})",
            s1.d(),
            s2.d()
        )));
    }
    let d = s1.d();
    let m = s1.basis().transpose() * s2.basis();
    let gram = m.transpose() * &m;
    let eig = sym_eig(&gram)?;
    let cos2 = eig.eigenvalues[d - 1].clamp(0.0, 1.0);
    if cos2 > 0.5 {
        let resid = s2.basis() - s1.basis() * &m;
        let g = resid.transpose() * &resid;
        let eig_g = sym_eig(&g)?;
        let sin2 = eig_g.eigenvalues[0].clamp(0.0, 1.0);
        Ok(sin2.sqrt().asin().to_degrees())
    } else {
        Ok(cos2.sqrt().acos().to_degrees())
    }
}
