//! Local maximization of span-invariant objectives over the Grassmann
//! manifold of p x d subspaces.
//!
//! The iteration is projected gradient ascent: the Euclidean gradient is
//! projected onto the tangent space at the current orthonormal basis, a
//! backtracking step is taken, and the iterate is pulled back onto the
//! manifold by QR re-orthonormalization. The contract is monotone ascent
//! plus orthonormal iterates, not any particular path geometry.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Subspace;

/// Sufficient-ascent fraction for the backtracking line search. The first
/// directional derivative along the projected gradient is its squared norm,
/// so a step is kept only when it realizes at least this fraction of the
/// linear prediction; smaller fractions let the search settle into
/// reflections around a maximum that never contract.
const ARMIJO_C: f64 = 0.1;

/// A span-invariant function of a p x d orthonormal basis.
///
/// `value` must satisfy value(B O) = value(B) for orthogonal O; this is
/// spot-checked once per optimization run. The Euclidean gradient is
/// optional; central differences are used when it is absent.
pub trait GrassmannObjective {
    /// (p, d) of the bases this objective accepts.
    fn dims(&self) -> (usize, usize);

    fn value(&self, basis: &DMatrix<f64>) -> Result<f64>;

    fn euclidean_gradient(&self, _basis: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Convergence threshold on the projected-gradient norm, relative to
    /// 1 + |objective value|.
    pub grad_tol: f64,
    pub initial_step: f64,
    /// Step for central-difference gradients.
    pub fd_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 500,
            grad_tol: 1e-8,
            initial_step: 1.0,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub subspace: Subspace,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Entry-wise central differences of the objective at `basis`.
pub fn numeric_gradient(
    objective: &dyn GrassmannObjective,
    basis: &DMatrix<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let (p, d) = basis.shape();
    let mut grad = DMatrix::zeros(p, d);
    let mut work = basis.clone();
    for i in 0..p {
        for j in 0..d {
            let orig = work[(i, j)];
            work[(i, j)] = orig + step;
            let up = objective.value(&work)?;
            work[(i, j)] = orig - step;
            let down = objective.value(&work)?;
            work[(i, j)] = orig;
            grad[(i, j)] = (up - down) / (2.0 * step);
        }
    }
    Ok(grad)
}

/// Orthonormalize `m` by QR with the R diagonal forced positive, so the
/// retraction is deterministic.
fn retract(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.ncols();
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q().columns(0, d).into_owned();
    for j in 0..d {
        if r[(j, j)] == 0.0 {
            return Err(Error::RankDeficient {
                eigenvalue: 0.0,
                threshold: 0.0,
            });
        }
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Deterministic d x d orthogonal matrix used for the span-invariance check.
fn probe_rotation(d: usize) -> DMatrix<f64> {
    let mut state = 0x243F_6A88_85A3_08D3u64;
    let mut m = DMatrix::zeros(d, d);
    for v in m.iter_mut() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *v = ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5;
    }
    for j in 0..d {
        m[(j, j)] += 2.0;
    }
    retract(&m).expect("probe rotation is full rank")
}

/// Projected-gradient ascent from `start`.
///
/// Each accepted step does not decrease the objective. Stops when the
/// projected-gradient norm falls below `grad_tol * (1 + |value|)`, when the
/// objective stalls, or after `max_iters` iterations. A non-finite objective
/// value during the line search aborts with the last good iterate and
/// `converged = false`.
pub fn optimize(
    objective: &dyn GrassmannObjective,
    start: &Subspace,
    opts: &OptimOptions,
) -> Result<OptimOutcome> {
    let (p, d) = objective.dims();
    if (start.p(), start.d()) != (p, d) {
        return Err(Error::dim(format!(
            "optimizer start is {}x{}, objective expects {}x{}",
            start.p(),
            start.d(),
            p,
            d
        )));
    }

    let mut basis = start.basis().clone();
    let mut value = objective.value(&basis)?;
    if !value.is_finite() {
        if value == f64::INFINITY {
            // exact fit: the likelihood is unbounded and the start attains it
            return Ok(OptimOutcome {
                subspace: Subspace::from_orthonormal(basis)?,
                value,
                iterations: 0,
                converged: true,
            });
        }
        return Err(Error::InvalidArgument(
            "objective is not finite at the starting subspace".into(),
        ));
    }

    // span-invariance spot check
    let rotated = &basis * probe_rotation(d);
    let rotated_value = objective.value(&rotated)?;
    if (rotated_value - value).abs() > 1e-8 * (1.0 + value.abs()) {
        return Err(Error::InvalidArgument(format!(
            "objective is not span-invariant: {value} vs {rotated_value} after rotation"
        )));
    }

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..opts.max_iters {
        iterations = iter;
        let grad = match objective.euclidean_gradient(&basis) {
            Some(g) => g,
            None => numeric_gradient(objective, &basis, opts.fd_step)?,
        };
        // tangent-space projection (I - B B^T) grad
        let tangent = &grad - &basis * (basis.transpose() * &grad);
        let gnorm = tangent.norm();
        if gnorm <= opts.grad_tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }

        // backtracking with an Armijo sufficient-ascent requirement, so the
        // search keeps halving past steps that merely reflect around the
        // optimum without making progress
        let mut step = opts.initial_step;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = retract(&(&basis + step * &tangent))?;
            let cand_value = objective.value(&candidate)?;
            if cand_value.is_nan() {
                return Ok(OptimOutcome {
                    subspace: Subspace::from_orthonormal(basis)?,
                    value,
                    iterations: iter,
                    converged: false,
                });
            }
            if cand_value == f64::INFINITY {
                return Ok(OptimOutcome {
                    subspace: Subspace::from_orthonormal(candidate)?,
                    value: cand_value,
                    iterations: iter + 1,
                    converged: true,
                });
            }
            if cand_value >= value + ARMIJO_C * step * gnorm * gnorm && cand_value.is_finite() {
                let gain = cand_value - value;
                basis = candidate;
                value = cand_value;
                accepted = true;
                if gain <= 1e-13 * (1.0 + value.abs()) {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            // no step with sufficient ascent exists at float precision
            converged = true;
            break;
        }
    }

    Ok(OptimOutcome {
        subspace: Subspace::from_orthonormal(basis)?,
        value,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// tr(B^T A B): maximized over G(p, d) by the top-d eigenvectors of A.
    struct TraceObjective {
        a: DMatrix<f64>,
        d: usize,
        analytic: bool,
    }

    impl GrassmannObjective for TraceObjective {
        fn dims(&self) -> (usize, usize) {
            (self.a.nrows(), self.d)
        }

        fn value(&self, basis: &DMatrix<f64>) -> Result<f64> {
            Ok((basis.transpose() * &self.a * basis).trace())
        }

        fn euclidean_gradient(&self, basis: &DMatrix<f64>) -> Option<DMatrix<f64>> {
            self.analytic.then(|| 2.0 * &self.a * basis)
        }
    }

    struct ConstantObjective {
        p: usize,
        d: usize,
    }

    impl GrassmannObjective for ConstantObjective {
        fn dims(&self) -> (usize, usize) {
            (self.p, self.d)
        }
        fn value(&self, _basis: &DMatrix<f64>) -> Result<f64> {
            Ok(4.5)
        }
    }

    #[test]
    fn rayleigh_quotient_finds_top_eigenvector() {
        let obj = TraceObjective {
            a: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0])),
            d: 1,
            analytic: true,
        };
        for start_coords in [[0.6, 0.8], [0.1, 0.99498743710662], [-0.8, 0.6]] {
            let start = Subspace::from_span(&DMatrix::from_column_slice(2, 1, &start_coords)).unwrap();
            let out = optimize(&obj, &start, &OptimOptions::default()).unwrap();
            assert!(out.converged);
            let e1 = Subspace::coordinate_axes(2, &[0]).unwrap();
            assert!(out.subspace.same_span(&e1, 1e-4), "ended {} deg away", crate::linalg::subspace_angle(&out.subspace, &e1).unwrap());
            assert!((out.value - 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn start_at_optimum_converges_immediately() {
        let obj = TraceObjective {
            a: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 2.0, 1.0])),
            d: 1,
            analytic: true,
        };
        let start = Subspace::coordinate_axes(3, &[0]).unwrap();
        let out = optimize(&obj, &start, &OptimOptions::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 1);
        assert!((out.value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_ascent_and_orthonormal_iterates() {
        // run with numeric gradient on a dense SPD matrix; the final value
        // must match the analytic-gradient run
        let a = {
            let m = DMatrix::from_row_slice(4, 4, &[
                2.0, 0.3, 0.1, -0.2,
                0.3, 1.5, 0.4, 0.0,
                0.1, 0.4, 1.0, 0.2,
                -0.2, 0.0, 0.2, 0.8,
            ]);
            m
        };
        let start = Subspace::from_span(&DMatrix::from_column_slice(4, 2, &[
            1.0, 1.0, 0.0, 0.5, 0.0, 1.0, -1.0, 0.3,
        ]))
        .unwrap();
        let numeric = optimize(
            &TraceObjective { a: a.clone(), d: 2, analytic: false },
            &start,
            &OptimOptions::default(),
        )
        .unwrap();
        let analytic = optimize(
            &TraceObjective { a: a.clone(), d: 2, analytic: true },
            &start,
            &OptimOptions::default(),
        )
        .unwrap();
        assert!((numeric.value - analytic.value).abs() < 1e-6);
        let b = numeric.subspace.basis();
        let defect = (b.transpose() * b - DMatrix::identity(2, 2)).abs().max();
        assert!(defect < 1e-10);
        // optimum = sum of two largest eigenvalues
        let eig = crate::linalg::sym_eig(&a).unwrap();
        let best = eig.eigenvalues[0] + eig.eigenvalues[1];
        assert!((analytic.value - best).abs() < 1e-7, "{} vs {best}", analytic.value);
    }

    #[test]
    fn constant_objective_has_zero_gradient() {
        let obj = ConstantObjective { p: 4, d: 2 };
        let basis = Subspace::coordinate_axes(4, &[0, 2]).unwrap();
        let g = numeric_gradient(&obj, basis.basis(), 1e-6).unwrap();
        assert!(g.abs().max() < 1e-12);
        let out = optimize(&obj, &basis, &OptimOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn linear_objective_gradient_matches() {
        // value = tr(C^T B) is not span-invariant, so only test the
        // finite-difference kernel itself
        struct Linear {
            c: DMatrix<f64>,
        }
        impl GrassmannObjective for Linear {
            fn dims(&self) -> (usize, usize) {
                self.c.shape()
            }
            fn value(&self, basis: &DMatrix<f64>) -> Result<f64> {
                Ok((self.c.transpose() * basis).trace())
            }
        }
        let c = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 3.0, -1.5, 0.25]);
        let obj = Linear { c: c.clone() };
        let basis = Subspace::coordinate_axes(3, &[0, 1]).unwrap();
        let g = numeric_gradient(&obj, basis.basis(), 1e-6).unwrap();
        assert!((g - c).abs().max() < 1e-8);
    }

    #[test]
    fn non_span_invariant_objective_rejected() {
        struct Biased;
        impl GrassmannObjective for Biased {
            fn dims(&self) -> (usize, usize) {
                (3, 2)
            }
            fn value(&self, basis: &DMatrix<f64>) -> Result<f64> {
                Ok(basis[(0, 0)])
            }
        }
        let start = Subspace::coordinate_axes(3, &[0, 1]).unwrap();
        assert!(matches!(
            optimize(&Biased, &start, &OptimOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
