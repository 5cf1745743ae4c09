//! Extended PFC model: heterogeneous errors along the reductive subspace and
//! its complement. The partially maximized log likelihood
//!
//!   L(G) = -(n/2) log |G0' Sigma G0| - (n/2) log |G' Sigma_res G|
//!
//! has no closed-form maximizer and is searched over candidate direction
//! sets, optionally refined by local Grassmann ascent. The G0 term is
//! evaluated through the determinant identity
//! |G0' Sigma G0| = |Sigma| * |G' Sigma^{-1} G| so the completion is never
//! materialized inside the optimizer.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::grassmann::{optimize, GrassmannObjective, OptimOptions};
use crate::linalg::{orthonormal_completion, spd_power, sym_eig, Subspace, SPD_REL_TOL};
use crate::moments::{compute_moments, symmetrize, Dataset, MomentSet};

use super::{CandidateSource, ExtendedFitDetail, FittedReduction, Method, Strategy};

/// The extended-PFC objective with the pieces that do not depend on G
/// precomputed. Implements [`GrassmannObjective`] with an analytic gradient.
pub struct ExtendedPfcObjective {
    n: f64,
    p: usize,
    d: usize,
    sigma_inv: DMatrix<f64>,
    sigma_res: DMatrix<f64>,
    logdet_sigma: f64,
}

impl ExtendedPfcObjective {
    pub fn new(m: &MomentSet, d: usize) -> Result<Self> {
        if d < 1 || d >= m.p {
            return Err(Error::InvalidArgument(format!(
                "extended PFC needs 1 <= d < p, got d = {d}, p = {}",
                m.p
            )));
        }
        let sigma_inv = spd_power(&m.sigma_hat, -1.0).map_err(|e| match e {
            Error::RankDeficient { eigenvalue, .. } => Error::NotPositiveDefinite {
                min_eigenvalue: eigenvalue,
            },
            other => other,
        })?;
        let logdet_sigma = crate::linalg::logdet(&m.sigma_hat)?;
        Ok(ExtendedPfcObjective {
            n: m.n as f64,
            p: m.p,
            d,
            sigma_inv,
            sigma_res: m.sigma_res.clone(),
            logdet_sigma,
        })
    }

    /// log |B' M B| through the spectrum of the small d x d matrix. Returns
    /// -inf when the matrix is numerically singular or indefinite.
    fn logdet_small(m: &DMatrix<f64>) -> f64 {
        match sym_eig(m) {
            Ok(eig) => {
                let lmax = eig.eigenvalues[0];
                let mut acc = 0.0;
                for &l in eig.eigenvalues.iter() {
                    if l <= lmax.max(0.0) * 1e-300 || l <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    acc += l.ln();
                }
                acc
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

impl GrassmannObjective for ExtendedPfcObjective {
    fn dims(&self) -> (usize, usize) {
        (self.p, self.d)
    }

    fn value(&self, basis: &DMatrix<f64>) -> Result<f64> {
        let bi = symmetrize(basis.transpose() * &self.sigma_inv * basis);
        let br = symmetrize(basis.transpose() * &self.sigma_res * basis);
        let term_inv = Self::logdet_small(&bi);
        if term_inv == f64::NEG_INFINITY {
            // B itself is numerically rank deficient
            return Err(Error::RankDeficient {
                eigenvalue: 0.0,
                threshold: 0.0,
            });
        }
        let term_res = Self::logdet_small(&br);
        if term_res == f64::NEG_INFINITY {
            // exact fit: the likelihood is unbounded above
            return Ok(f64::INFINITY);
        }
        Ok(-self.n / 2.0 * (self.logdet_sigma + term_inv + term_res))
    }

    fn euclidean_gradient(&self, basis: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let bi = symmetrize(basis.transpose() * &self.sigma_inv * basis);
        let br = symmetrize(basis.transpose() * &self.sigma_res * basis);
        let bi_inv = bi.try_inverse()?;
        let br_inv = br.try_inverse()?;
        // d/dB log|B'MB| = 2 M B (B'MB)^{-1}
        Some(-self.n * (&self.sigma_inv * basis * bi_inv + &self.sigma_res * basis * br_inv))
    }
}

/// Value of the extended-PFC log likelihood at a subspace.
pub fn eval_extended_pfc_objective(s: &Subspace, m: &MomentSet) -> Result<f64> {
    if s.p() != m.p {
        return Err(Error::dim(format!(
            "subspace lives in R^{} but moments are {}-dimensional",
            s.p(),
            m.p
        )));
    }
    let obj = ExtendedPfcObjective::new(m, s.d())?;
    obj.value(s.basis())
}

/// Explicit-completion evaluation of the same likelihood, used to pin the
/// determinant identity.
#[cfg(test)]
pub(crate) fn eval_with_completion(s: &Subspace, m: &MomentSet) -> Result<f64> {
    let g0 = orthonormal_completion(s)?;
    let t0 = crate::linalg::logdet(&symmetrize(
        g0.basis().transpose() * &m.sigma_hat * g0.basis(),
    ))?;
    let t1 = crate::linalg::logdet(&symmetrize(
        s.basis().transpose() * &m.sigma_res * s.basis(),
    ))?;
    Ok(-(m.n as f64) / 2.0 * (t0 + t1))
}

struct Candidate {
    direction: DVector<f64>,
    source: CandidateSource,
}

/// Eigenvector candidates: all PC directions, the leading rank(Sigma_fit)
/// PFC directions (at most r), and all RC directions.
fn candidate_pool(m: &MomentSet) -> Result<Vec<Candidate>> {
    let p = m.p;
    let mut pool = Vec::new();
    let eig_pc = sym_eig(&m.sigma_hat)?;
    for j in 0..p {
        pool.push(Candidate {
            direction: eig_pc.eigenvectors.column(j).into_owned(),
            source: CandidateSource::Pc,
        });
    }
    let eig_fit = sym_eig(&m.sigma_fit)?;
    let scale = eig_pc.eigenvalues[0].max(0.0);
    let rank = eig_fit
        .eigenvalues
        .iter()
        .filter(|&&l| l > p as f64 * SPD_REL_TOL * scale && l > 0.0)
        .count();
    for j in 0..rank.min(m.r.max(1)) {
        pool.push(Candidate {
            direction: eig_fit.eigenvectors.column(j).into_owned(),
            source: CandidateSource::Pfc,
        });
    }
    let eig_res = sym_eig(&m.sigma_res)?;
    for j in 0..p {
        pool.push(Candidate {
            direction: eig_res.eigenvectors.column(j).into_owned(),
            source: CandidateSource::Rc,
        });
    }
    Ok(pool)
}

/// Iterate over k-subsets of 0..n in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn assemble(pool: &[Candidate], subset: &[usize], p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, subset.len());
    for (col, &i) in subset.iter().enumerate() {
        m.column_mut(col).copy_from(&pool[i].direction);
    }
    m
}

fn subset_source(pool: &[Candidate], subset: &[usize]) -> CandidateSource {
    let first = pool[subset[0]].source;
    if subset.iter().all(|&i| pool[i].source == first) {
        first
    } else {
        CandidateSource::Mixed
    }
}

struct SearchResult {
    subspace: Subspace,
    value: f64,
    source: CandidateSource,
}

/// Best d-subset of the given slice of the pool (ties keep the earliest
/// subset in PC, PFC, RC, index order).
fn best_subset(
    obj: &ExtendedPfcObjective,
    pool: &[Candidate],
    d: usize,
    p: usize,
) -> Result<SearchResult> {
    let mut best: Option<SearchResult> = None;
    let mut search_error: Option<Error> = None;
    for_each_subset(pool.len(), d, |subset| {
        if search_error.is_some() {
            return;
        }
        let m = assemble(pool, subset, p);
        // candidates from different sets can be (nearly) collinear; skip
        // subsets that do not span d dimensions
        let s = match Subspace::from_span(&m) {
            Ok(s) => s,
            Err(_) => return,
        };
        match obj.value(s.basis()) {
            Ok(v) => {
                if best.as_ref().is_none_or(|b| v > b.value) {
                    best = Some(SearchResult {
                        subspace: s,
                        value: v,
                        source: subset_source(pool, subset),
                    });
                }
            }
            Err(e) => search_error = Some(e),
        }
    });
    if let Some(e) = search_error {
        return Err(e);
    }
    best.ok_or_else(|| Error::FitFailure("no usable candidate subset".into()))
}

/// Greedy sequential selection from the PC candidate set.
fn sequential_search(
    obj: &ExtendedPfcObjective,
    pc_dirs: &[Candidate],
    d: usize,
    p: usize,
) -> Result<SearchResult> {
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    for _step in 0..d {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..pc_dirs.len() {
            if chosen.contains(&i) {
                continue;
            }
            let mut cols = chosen.clone();
            cols.push(i);
            let m = assemble(pc_dirs, &cols, p);
            let s = match Subspace::from_span(&m) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let v = obj.value(s.basis())?;
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
        let (winner, _) =
            best.ok_or_else(|| Error::FitFailure("sequential search exhausted candidates".into()))?;
        chosen.push(winner);
    }
    let m = assemble(pc_dirs, &chosen, p);
    let s = Subspace::from_span(&m)?;
    let value = obj.value(s.basis())?;
    Ok(SearchResult {
        subspace: s,
        value,
        source: CandidateSource::Pc,
    })
}

/// Fit the extended PFC model from precomputed moments.
pub fn fit_extended_pfc_from_moments(
    m: &MomentSet,
    d: usize,
    strategy: Strategy,
) -> Result<FittedReduction> {
    let p = m.p;
    let obj = ExtendedPfcObjective::new(m, d)?;
    let pool = candidate_pool(m)?;
    let mut warnings = Vec::new();

    let result = match strategy {
        Strategy::PfcPc => {
            let pc: Vec<Candidate> = pool
                .into_iter()
                .filter(|c| c.source == CandidateSource::Pc)
                .collect();
            best_subset(&obj, &pc, d, p)?
        }
        Strategy::PfcAll => best_subset(&obj, &pool, d, p)?,
        Strategy::Sequential => {
            let pc: Vec<Candidate> = pool
                .into_iter()
                .filter(|c| c.source == CandidateSource::Pc)
                .collect();
            sequential_search(&obj, &pc, d, p)?
        }
        Strategy::Grassmann => {
            let seed = best_subset(&obj, &pool, d, p)?;
            if seed.value == f64::INFINITY {
                seed
            } else {
                let out = optimize(&obj, &seed.subspace, &OptimOptions::default())?;
                if !out.converged {
                    warnings.push(
                        "Grassmann ascent stopped before the gradient tolerance was met".into(),
                    );
                }
                SearchResult {
                    subspace: out.subspace,
                    value: out.value,
                    source: CandidateSource::GrassmannLocal,
                }
            }
        }
    };

    let g = result.subspace;
    let omega2 = symmetrize(g.basis().transpose() * &m.sigma_res * g.basis());
    let g0 = orthonormal_completion(&g)?;
    let omega0_2 = symmetrize(g0.basis().transpose() * &m.sigma_hat * g0.basis());

    let mut diagnostics = serde_json::Map::new();
    diagnostics.insert("strategy".into(), json!(strategy.as_str()));
    diagnostics.insert("candidate_source".into(), json!(result.source.as_str()));

    let coordinate_map = g.basis().clone();
    Ok(FittedReduction {
        method: Method::ExtendedPfc,
        subspace: g,
        coordinate_map,
        sigma2_hat: None,
        delta_hat: None,
        loglik: result.value,
        d,
        r: m.r,
        n: m.n,
        p,
        basis_kind: None,
        beta_hat: None,
        extended: Some(ExtendedFitDetail {
            omega2_hat: omega2,
            omega0_2_hat: omega0_2,
            candidate_source: result.source,
        }),
        diagnostics,
        warnings,
    })
}

/// Fit the extended PFC model from data and a basis.
pub fn fit_extended_pfc(
    data: &Dataset,
    basis: &BasisMatrix,
    d: usize,
    strategy: Strategy,
) -> Result<FittedReduction> {
    let moments = compute_moments(data, basis)?;
    let mut fit = fit_extended_pfc_from_moments(&moments, d, strategy)?;
    fit.basis_kind = Some(basis.kind);
    fit.warnings.extend(basis.warnings.iter().cloned());
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BasisKind};
    use crate::linalg::subspace_angle;
    use crate::simulate::rng::{fill_standard_normal, standard_normal_vector, stream_rng};

    fn model12_dataset(
        n: usize,
        p: usize,
        sigma: f64,
        sigma_y: f64,
        sigma_0: f64,
        seed: u64,
    ) -> Dataset {
        // Gamma = e_1, Gamma_0 = remaining axes
        let mut rng = stream_rng(seed, 0, 11);
        let y = standard_normal_vector(&mut rng, n) * sigma_y;
        let mut eps = DMatrix::zeros(n, p);
        fill_standard_normal(&mut rng, &mut eps);
        let x = DMatrix::from_fn(n, p, |i, j| {
            if j == 0 {
                y[i] + sigma * eps[(i, j)]
            } else {
                sigma_0 * eps[(i, j)]
            }
        });
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn separable_objective_prefers_small_residual_axis() {
        // p = 2, Sigma = I, Sigma_res = diag(a, b) with a < b: the G0 term is
        // constant, so the objective is maximized at the axis of min(a, b)
        let sigma = DMatrix::identity(2, 2);
        let fit = DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, 0.2]));
        let m = MomentSet::from_parts(sigma, fit, 100, 1).unwrap();
        // Sigma_res = diag(0.3, 0.8): axis e_1 has the smaller residual
        let e1 = Subspace::coordinate_axes(2, &[0]).unwrap();
        let e2 = Subspace::coordinate_axes(2, &[1]).unwrap();
        let v1 = eval_extended_pfc_objective(&e1, &m).unwrap();
        let v2 = eval_extended_pfc_objective(&e2, &m).unwrap();
        assert!(v1 > v2);
        // and strictly better than an oblique direction
        let mid = Subspace::from_span(&DMatrix::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
        assert!(v1 > eval_extended_pfc_objective(&mid, &m).unwrap());
    }

    #[test]
    fn objective_is_span_invariant() {
        let data = model12_dataset(80, 5, 1.0, 1.0, 1.5, 4);
        let b = build_basis(&data.y, BasisKind::Slices(4)).unwrap();
        let m = compute_moments(&data, &b).unwrap();
        let mut rng = stream_rng(5, 0, 12);
        for _ in 0..5 {
            let mut raw = DMatrix::zeros(5, 2);
            fill_standard_normal(&mut rng, &mut raw);
            let s = Subspace::from_span(&raw).unwrap();
            let v = eval_extended_pfc_objective(&s, &m).unwrap();
            let mut rot = DMatrix::zeros(2, 2);
            fill_standard_normal(&mut rng, &mut rot);
            let o = Subspace::from_span(&rot).unwrap();
            let rotated = Subspace::from_orthonormal(s.basis() * o.basis()).unwrap();
            let v2 = eval_extended_pfc_objective(&rotated, &m).unwrap();
            assert!((v - v2).abs() < 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn determinant_identity_matches_explicit_completion() {
        let data = model12_dataset(60, 4, 1.0, 1.0, 0.5, 6);
        let b = build_basis(&data.y, BasisKind::Slices(4)).unwrap();
        let m = compute_moments(&data, &b).unwrap();
        let mut rng = stream_rng(8, 0, 13);
        for _ in 0..10 {
            let mut raw = DMatrix::zeros(4, 1);
            fill_standard_normal(&mut rng, &mut raw);
            let s = Subspace::from_span(&raw).unwrap();
            let via_identity = eval_extended_pfc_objective(&s, &m).unwrap();
            let via_completion = eval_with_completion(&s, &m).unwrap();
            assert!(
                (via_identity - via_completion).abs() < 1e-8 * (1.0 + via_identity.abs()),
                "{via_identity} vs {via_completion}"
            );
        }
    }

    #[test]
    fn grid_search_agrees_with_optimizer_on_sphere() {
        // p = 3, d = 1: compare the Grassmann strategy with a 1-degree grid
        let data = model12_dataset(120, 3, 0.7, 1.3, 0.4, 9);
        let b = build_basis(&data.y, BasisKind::Slices(5)).unwrap();
        let m = compute_moments(&data, &b).unwrap();
        let obj = ExtendedPfcObjective::new(&m, 1).unwrap();

        let mut best_v = f64::NEG_INFINITY;
        let mut best_dir = DVector::zeros(3);
        let deg = std::f64::consts::PI / 180.0;
        let mut theta = 0.0f64;
        while theta < 180.0 * deg {
            let mut phi = 0.0f64;
            while phi < 180.0 * deg {
                let dir = DVector::from_column_slice(&[
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ]);
                if dir.norm() > 1e-9 {
                    let s = Subspace::from_span(&DMatrix::from_column_slice(3, 1, dir.as_slice()))
                        .unwrap();
                    let v = obj.value(s.basis()).unwrap();
                    if v > best_v {
                        best_v = v;
                        best_dir = dir;
                    }
                }
                phi += deg;
            }
            theta += deg;
        }
        let grid_best =
            Subspace::from_span(&DMatrix::from_column_slice(3, 1, best_dir.as_slice())).unwrap();

        let fit = fit_extended_pfc_from_moments(&m, 1, Strategy::Grassmann).unwrap();
        let angle = subspace_angle(&fit.subspace, &grid_best).unwrap();
        assert!(angle < 2.0, "optimizer is {angle} degrees from the grid argmax");
        assert!(fit.loglik >= best_v - 1e-9 * best_v.abs());
    }

    #[test]
    fn strategies_agree_on_well_separated_signal() {
        let data = model12_dataset(300, 3, 0.3, 2.0, 0.4, 10);
        let b = build_basis(&data.y, BasisKind::Slices(6)).unwrap();
        let fits: Vec<FittedReduction> = [
            Strategy::PfcPc,
            Strategy::PfcAll,
            Strategy::Sequential,
            Strategy::Grassmann,
        ]
        .iter()
        .map(|&s| fit_extended_pfc(&data, &b, 1, s).unwrap())
        .collect();
        for pair in fits.windows(2) {
            let angle = subspace_angle(&pair[0].subspace, &pair[1].subspace).unwrap();
            assert!(angle < 0.5, "strategies disagree by {angle} degrees");
        }
    }

    #[test]
    fn search_nesting_orders_logliks() {
        for seed in [11u64, 12, 13, 14, 15] {
            let data = model12_dataset(150, 5, 1.0, 1.0, 1.4, seed);
            let b = build_basis(&data.y, BasisKind::Slices(5)).unwrap();
            let pc = fit_extended_pfc(&data, &b, 1, Strategy::PfcPc).unwrap();
            let all = fit_extended_pfc(&data, &b, 1, Strategy::PfcAll).unwrap();
            let gr = fit_extended_pfc(&data, &b, 1, Strategy::Grassmann).unwrap();
            assert!(all.loglik >= pc.loglik - 1e-10 * pc.loglik.abs());
            assert!(gr.loglik >= all.loglik - 1e-10 * all.loglik.abs());
        }
    }

    #[test]
    fn omega_estimates_are_spd_and_recorded() {
        let data = model12_dataset(100, 4, 1.0, 1.0, 0.8, 16);
        let b = build_basis(&data.y, BasisKind::Slices(4)).unwrap();
        let fit = fit_extended_pfc(&data, &b, 2, Strategy::PfcAll).unwrap();
        let detail = fit.extended.as_ref().unwrap();
        assert_eq!(detail.omega2_hat.shape(), (2, 2));
        assert_eq!(detail.omega0_2_hat.shape(), (2, 2));
        for m in [&detail.omega2_hat, &detail.omega0_2_hat] {
            let eig = sym_eig(m).unwrap();
            assert!(eig.eigenvalues[eig.eigenvalues.len() - 1] > 0.0);
        }
    }

    #[test]
    fn d_can_exceed_r() {
        // d = 2 with a single basis column (r = 1): the pool pads from PC
        // and RC directions
        let data = model12_dataset(100, 4, 1.0, 1.0, 0.8, 17);
        let b = build_basis(&data.y, BasisKind::Linear).unwrap();
        let fit = fit_extended_pfc(&data, &b, 2, Strategy::PfcAll).unwrap();
        assert_eq!(fit.d, 2);
        assert_eq!(fit.r, 1);
    }

    #[test]
    fn numeric_and_analytic_gradients_agree() {
        let data = model12_dataset(90, 4, 1.0, 1.2, 0.9, 18);
        let b = build_basis(&data.y, BasisKind::Slices(4)).unwrap();
        let m = compute_moments(&data, &b).unwrap();
        let obj = ExtendedPfcObjective::new(&m, 2).unwrap();
        let mut rng = stream_rng(21, 0, 14);
        for _ in 0..10 {
            let mut raw = DMatrix::zeros(4, 2);
            fill_standard_normal(&mut rng, &mut raw);
            let s = Subspace::from_span(&raw).unwrap();
            let analytic = obj.euclidean_gradient(s.basis()).unwrap();
            let numeric = crate::grassmann::numeric_gradient(&obj, s.basis(), 1e-6).unwrap();
            let scale = analytic.abs().max().max(1.0);
            let diff = (&analytic - &numeric).abs().max();
            assert!(diff < 1e-5 * scale, "gradient mismatch {diff} at scale {scale}");
        }
    }
}
