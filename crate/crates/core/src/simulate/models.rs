//! Simulation models and their closed-form population quantities.
//!
//! m7:          X_y = Gamma y + sigma eps                  (isotropic)
//! m12:         X_y = Gamma y + sigma_0 Gamma_0 eps_0 + sigma Gamma eps
//! m19:         X_y = Gamma y + Delta^{1/2} eps, Delta = A'A from its own seed
//! m19-exactfit: as m19 with Delta = (c I - Gamma Gamma') sigma_Y^2,
//!               c = 1 + 0.1 / 10^k (c <= 1 is rejected: Delta not PD)
//!
//! Y ~ N(0, sigma_Y^2) throughout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_completion, spd_power, Subspace};
use crate::moments::{symmetrize, Dataset};

use super::rng::{standard_normal_vector, stream_rng};
use super::study::EstimatorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimModel {
    M7,
    M12,
    M19,
    M19Exactfit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub model: SimModel,
    pub n: usize,
    pub p: usize,
    pub sigma_y: f64,
    pub sigma: f64,
    /// Inactive-direction scale (m12 only).
    pub sigma_0: f64,
    /// Unit direction of the conditional mean; model-specific default when
    /// absent (e_1 for m7/m12, (1,..,1)/sqrt(p) for m19).
    pub gamma: Option<Vec<f64>>,
    /// Seed for the one-time random Delta = A'A of m19.
    pub delta_seed: u64,
    /// Exact-fit exponent: c = 1 + 0.1/10^k (m19-exactfit only).
    pub k: f64,
    pub reps: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub seed: u64,
    /// Optional parameter sweep for [`super::study::run_study`].
    pub sweep: Option<Sweep>,
    /// Compute the scaled prediction MSE alongside angles (d = 1 only).
    pub compute_mse: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            model: SimModel::M7,
            n: 40,
            p: 10,
            sigma_y: 1.0,
            sigma: 1.0,
            sigma_0: 1.0,
            gamma: None,
            delta_seed: 1977,
            k: 0.0,
            reps: 100,
            estimators: vec![],
            seed: 1,
            sweep: None,
            compute_mse: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    N,
    SigmaY,
    Sigma,
    Sigma0,
    K,
}

impl SweepParam {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::SigmaY => "sigma_y",
            SweepParam::Sigma => "sigma",
            SweepParam::Sigma0 => "sigma_0",
            SweepParam::K => "k",
        }
    }

    pub fn apply(&self, cfg: &mut SimConfig, value: f64) {
        match self {
            SweepParam::N => cfg.n = value.round() as usize,
            SweepParam::SigmaY => cfg.sigma_y = value,
            SweepParam::Sigma => cfg.sigma = value,
            SweepParam::Sigma0 => cfg.sigma_0 = value,
            SweepParam::K => cfg.k = value,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_y <= 0.0 || self.sigma <= 0.0 || self.sigma_0 <= 0.0 {
            return Err(Error::InvalidArgument("all scale parameters must be positive".into()));
        }
        if self.reps < 1 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.p < 2 {
            return Err(Error::InvalidArgument("p must be at least 2".into()));
        }
        if let Some(g) = &self.gamma {
            if g.len() != self.p {
                return Err(Error::dim(format!(
                    "gamma has {} entries, p = {}",
                    g.len(),
                    self.p
                )));
            }
            let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "gamma must be a unit vector (norm {norm})"
                )));
            }
        }
        if self.model == SimModel::M19Exactfit && self.exactfit_c() <= 1.0 {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: (self.exactfit_c() - 1.0) * self.sigma_y * self.sigma_y,
            });
        }
        Ok(())
    }

    pub fn exactfit_c(&self) -> f64 {
        1.0 + 0.1 / 10f64.powf(self.k)
    }

    /// The mean direction, defaulted per model.
    pub fn gamma_vector(&self) -> DVector<f64> {
        match &self.gamma {
            Some(g) => DVector::from_column_slice(g),
            None => match self.model {
                SimModel::M7 | SimModel::M12 => {
                    let mut g = DVector::zeros(self.p);
                    g[0] = 1.0;
                    g
                }
                SimModel::M19 | SimModel::M19Exactfit => {
                    DVector::from_element(self.p, 1.0 / (self.p as f64).sqrt())
                }
            },
        }
    }

    /// Conditional covariance Delta for the m19 family.
    pub fn delta(&self) -> Result<DMatrix<f64>> {
        match self.model {
            SimModel::M19 => {
                let mut rng = stream_rng(self.delta_seed, 0, 99);
                let mut a = DMatrix::zeros(self.p, self.p);
                super::rng::fill_standard_normal(&mut rng, &mut a);
                Ok(symmetrize(a.transpose() * &a))
            }
            SimModel::M19Exactfit => {
                let c = self.exactfit_c();
                if c <= 1.0 {
                    return Err(Error::NotPositiveDefinite {
                        min_eigenvalue: (c - 1.0) * self.sigma_y * self.sigma_y,
                    });
                }
                let g = self.gamma_vector();
                let sy2 = self.sigma_y * self.sigma_y;
                Ok(symmetrize(
                    (DMatrix::identity(self.p, self.p) * c - &g * g.transpose()) * sy2,
                ))
            }
            _ => Err(Error::InvalidArgument(
                "Delta is defined only for the m19 family".into(),
            )),
        }
    }
}

/// One replication of the configured model, deterministic in
/// (seed, rep_index).
pub fn generate(cfg: &SimConfig, rep_index: u64) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.n;
    let p = cfg.p;
    let gamma = cfg.gamma_vector();

    let mut rng_y = stream_rng(cfg.seed, rep_index, 0);
    let mut rng_e = stream_rng(cfg.seed, rep_index, 1);
    let y = standard_normal_vector(&mut rng_y, n) * cfg.sigma_y;

    let x = match cfg.model {
        SimModel::M7 => {
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                let eps = standard_normal_vector(&mut rng_e, p);
                for j in 0..p {
                    x[(i, j)] = gamma[j] * y[i] + cfg.sigma * eps[j];
                }
            }
            x
        }
        SimModel::M12 => {
            let gspan = Subspace::from_span(&DMatrix::from_column_slice(p, 1, gamma.as_slice()))?;
            let gamma0 = orthonormal_completion(&gspan)?;
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                let eps0 = standard_normal_vector(&mut rng_e, p - 1);
                let eps = standard_normal_vector(&mut rng_e, 1);
                let noise = gamma0.basis() * eps0 * cfg.sigma_0 + &gamma * (cfg.sigma * eps[0]);
                for j in 0..p {
                    x[(i, j)] = gamma[j] * y[i] + noise[j];
                }
            }
            x
        }
        SimModel::M19 | SimModel::M19Exactfit => {
            let delta = cfg.delta()?;
            let delta_half = spd_power(&delta, 0.5)?;
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                let eps = standard_normal_vector(&mut rng_e, p);
                let noise = &delta_half * eps;
                for j in 0..p {
                    x[(i, j)] = gamma[j] * y[i] + noise[j];
                }
            }
            x
        }
    };
    Dataset::new(x, y)
}

/// Population limits of the moment matrices under the configured model with
/// the linear basis f_y = y - ybar, plus the true reductive subspace.
#[derive(Debug, Clone)]
pub struct PopulationMoments {
    pub sigma: DMatrix<f64>,
    pub sigma_fit: DMatrix<f64>,
    pub sigma_res: DMatrix<f64>,
    pub true_subspace: Subspace,
}

/// Closed-form population moments; only the linear basis admits them here
/// (Var f_Y = sigma_Y^2).
pub fn population_moments(cfg: &SimConfig, basis: BasisKind) -> Result<PopulationMoments> {
    if basis != BasisKind::Linear {
        return Err(Error::InvalidArgument(format!(
            "closed-form population moments require the linear basis, got {basis}"
        )));
    }
    cfg.validate()?;
    let p = cfg.p;
    let gamma = cfg.gamma_vector();
    let sy2 = cfg.sigma_y * cfg.sigma_y;
    let gamma_span = Subspace::from_span(&DMatrix::from_column_slice(p, 1, gamma.as_slice()))?;
    let sigma_fit = symmetrize(&gamma * gamma.transpose() * sy2);

    let (sigma_res, true_subspace) = match cfg.model {
        SimModel::M7 => (
            DMatrix::identity(p, p) * (cfg.sigma * cfg.sigma),
            gamma_span,
        ),
        SimModel::M12 => {
            let gamma0 = orthonormal_completion(&gamma_span)?;
            let res = symmetrize(
                gamma0.basis() * gamma0.basis().transpose() * (cfg.sigma_0 * cfg.sigma_0)
                    + &gamma * gamma.transpose() * (cfg.sigma * cfg.sigma),
            );
            (res, gamma_span)
        }
        SimModel::M19 | SimModel::M19Exactfit => {
            let delta = cfg.delta()?;
            let dir = spd_power(&delta, -1.0)? * &gamma;
            let truth = Subspace::from_span(&DMatrix::from_column_slice(p, 1, dir.as_slice()))?;
            (delta, truth)
        }
    };
    let sigma = symmetrize(&sigma_res + &sigma_fit);
    Ok(PopulationMoments {
        sigma,
        sigma_fit,
        sigma_res,
        true_subspace,
    })
}

/// Asymptotics of the forward OLS coefficient under m7:
/// alpha = R Gamma with R = sigma_Y^2/(sigma_Y^2 + sigma^2),
/// Var(alpha_hat) = R Q_Gamma + R(1-R) P_Gamma, and the marginal predictor
/// correlations rho_jk.
#[derive(Debug, Clone)]
pub struct OlsOracles {
    pub alpha: DVector<f64>,
    pub var_alpha: DMatrix<f64>,
    pub rho: DMatrix<f64>,
    pub r_coefficient: f64,
}

pub fn ols_oracles(cfg: &SimConfig) -> Result<OlsOracles> {
    if cfg.model != SimModel::M7 {
        return Err(Error::InvalidArgument(
            "OLS oracles are defined for the m7 family".into(),
        ));
    }
    cfg.validate()?;
    let p = cfg.p;
    let gamma = cfg.gamma_vector();
    let sy2 = cfg.sigma_y * cfg.sigma_y;
    let s2 = cfg.sigma * cfg.sigma;
    let r = sy2 / (sy2 + s2);
    let alpha = &gamma * r;
    let p_gamma = &gamma * gamma.transpose();
    let q_gamma = DMatrix::identity(p, p) - &p_gamma;
    let var_alpha = q_gamma * r + p_gamma * (r * (1.0 - r));
    let rho = DMatrix::from_fn(p, p, |j, k| {
        if j == k {
            1.0
        } else {
            gamma[j] * gamma[k] * sy2
                / ((s2 + gamma[j] * gamma[j] * sy2) * (s2 + gamma[k] * gamma[k] * sy2)).sqrt()
        }
    });
    Ok(OlsOracles {
        alpha,
        var_alpha,
        rho,
        r_coefficient: r,
    })
}

/// E(Var(Y | Y in H_k)) for h equal-probability slices of N(0, sigma_Y^2),
/// by adaptive quadrature over each slice.
pub fn expected_within_slice_variance(sigma_y: f64, h: usize) -> Result<f64> {
    if h < 1 {
        return Err(Error::InvalidArgument("need at least one slice".into()));
    }
    // work in standard units, scale the result by sigma_Y^2
    let mut boundaries = Vec::with_capacity(h + 1);
    boundaries.push(-12.0f64);
    for k in 1..h {
        boundaries.push(crate::prob::normal_quantile(k as f64 / h as f64)?);
    }
    boundaries.push(12.0);

    let phi = crate::prob::normal_pdf;
    let integrate = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
        // composite Simpson, fine fixed grid: the integrands are smooth
        let steps = 4000;
        let hstep = (b - a) / steps as f64;
        let mut acc = f(a) + f(b);
        for i in 1..steps {
            let t = a + i as f64 * hstep;
            acc += f(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * hstep / 3.0
    };

    let mut expected_var = 0.0;
    for k in 0..h {
        let (a, b) = (boundaries[k], boundaries[k + 1]);
        let mass = integrate(&|z| phi(z), a, b);
        let mean_z = integrate(&|z| z * phi(z), a, b);
        let second = integrate(&|z| z * z * phi(z), a, b);
        // contribution P_k * Var(Z | slice) = second_moment - mean^2/mass
        expected_var += second - mean_z * mean_z / mass;
    }
    Ok(expected_var * sigma_y * sigma_y)
}

/// The slicing bias of SIR under the m19 family:
/// Delta - Delta_sir = Gamma Gamma' E(Var(Y | Y in H_k)).
pub fn delta_sir_gap(cfg: &SimConfig, h: usize) -> Result<DMatrix<f64>> {
    match cfg.model {
        SimModel::M19 | SimModel::M19Exactfit => {}
        _ => {
            return Err(Error::InvalidArgument(
                "the SIR slicing gap is defined for the m19 family".into(),
            ))
        }
    }
    cfg.validate()?;
    let gamma = cfg.gamma_vector();
    let ev = expected_within_slice_variance(cfg.sigma_y, h)?;
    Ok(symmetrize(&gamma * gamma.transpose() * ev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;

    fn base_cfg(model: SimModel) -> SimConfig {
        SimConfig {
            model,
            n: 100,
            p: 6,
            sigma_y: 1.0,
            sigma: 1.0,
            sigma_0: 1.0,
            seed: 42,
            ..SimConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic_per_rep() {
        let cfg = base_cfg(SimModel::M12);
        let a = generate(&cfg, 3).unwrap();
        let b = generate(&cfg, 3).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let c = generate(&cfg, 4).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn noiseless_m7_lies_on_gamma() {
        let mut cfg = base_cfg(SimModel::M7);
        cfg.sigma = 1e-12;
        let data = generate(&cfg, 0).unwrap();
        // every row is Gamma * y_i up to 1e-12 noise
        for i in 0..data.n() {
            assert!((data.x[(i, 0)] - data.y[i]).abs() < 1e-9);
            for j in 1..cfg.p {
                assert!(data.x[(i, j)].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn m12_sample_covariance_approaches_population() {
        let mut cfg = base_cfg(SimModel::M12);
        cfg.n = 20000;
        cfg.p = 5;
        cfg.sigma_0 = 1.3;
        let data = generate(&cfg, 0).unwrap();
        let sample = data.sigma_hat();
        let pop = population_moments(&cfg, BasisKind::Linear).unwrap();
        let diff = &sample - &pop.sigma;
        let spectral = sym_eig(&crate::moments::symmetrize(diff.clone()))
            .unwrap()
            .eigenvalues
            .amax();
        let scale = sym_eig(&pop.sigma).unwrap().eigenvalues.amax();
        assert!(
            spectral < 0.05 * scale,
            "spectral deviation {spectral} vs scale {scale}"
        );
    }

    #[test]
    fn m12_population_eigenvalues() {
        let mut cfg = base_cfg(SimModel::M12);
        cfg.p = 10;
        let pop = population_moments(&cfg, BasisKind::Linear).unwrap();
        let eig = sym_eig(&pop.sigma).unwrap();
        // sigma = sigma_y = sigma_0 = 1: eigenvalues {2, 1 x 9}
        assert!((eig.eigenvalues[0] - 2.0).abs() < 1e-12);
        for j in 1..10 {
            assert!((eig.eigenvalues[j] - 1.0).abs() < 1e-12);
        }

        // sigma_0 < sqrt(sigma_y^2 + sigma^2): signal dominates, the
        // population eigengap diagnostic is positive
        let gap = crate::estimators::signal_dominance_gap(&pop.sigma, 1).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);

        // sigma_0 = sqrt(2): all eigenvalues equal 2 (PC uninformative)
        cfg.sigma_0 = 2f64.sqrt();
        let pop = population_moments(&cfg, BasisKind::Linear).unwrap();
        let eig = sym_eig(&pop.sigma).unwrap();
        for j in 0..10 {
            assert!((eig.eigenvalues[j] - 2.0).abs() < 1e-12);
        }
        let gap = crate::estimators::signal_dominance_gap(&pop.sigma, 1).unwrap();
        assert!(gap.abs() < 1e-12);
    }

    #[test]
    fn exactfit_population_is_spherical() {
        let mut cfg = base_cfg(SimModel::M19Exactfit);
        cfg.p = 10;
        cfg.sigma_y = 15.0;
        cfg.k = 2.0;
        cfg.n = 20000;
        let pop = population_moments(&cfg, BasisKind::Linear).unwrap();
        let c = cfg.exactfit_c();
        let target = DMatrix::identity(10, 10) * (c * 225.0);
        assert!((pop.sigma.clone() - &target).abs().max() < 1e-9);

        // sample covariance agrees at large n
        let data = generate(&cfg, 0).unwrap();
        let sample = data.sigma_hat();
        let diff = sym_eig(&crate::moments::symmetrize(&sample - &target))
            .unwrap()
            .eigenvalues
            .amax();
        assert!(diff < 0.05 * c * 225.0, "spectral deviation {diff}");
    }

    #[test]
    fn exactfit_rejects_c_below_one() {
        let mut cfg = base_cfg(SimModel::M19Exactfit);
        cfg.k = f64::INFINITY; // c = 1 exactly
        assert!(generate(&cfg, 0).is_err());
    }

    #[test]
    fn population_moments_require_linear_basis() {
        let cfg = base_cfg(SimModel::M7);
        assert!(population_moments(&cfg, BasisKind::Slices(4)).is_err());
        assert!(population_moments(&cfg, BasisKind::Linear).is_ok());
    }

    #[test]
    fn ols_oracle_formulas() {
        let cfg = base_cfg(SimModel::M7); // sigma_y = sigma = 1
        let oracle = ols_oracles(&cfg).unwrap();
        assert!((oracle.r_coefficient - 0.5).abs() < 1e-15);
        // alpha = Gamma / 2
        assert!((oracle.alpha[0] - 0.5).abs() < 1e-15);
        for j in 1..cfg.p {
            assert!(oracle.alpha[j].abs() < 1e-15);
        }
        // alpha' Var^{-1} alpha = R/(1-R) = 1
        let var_inv = oracle.var_alpha.clone().try_inverse().unwrap();
        let quad = oracle.alpha.dot(&(&var_inv * &oracle.alpha));
        assert!((quad - 1.0).abs() < 1e-12);
        // Gamma = e_1: predictors marginally uncorrelated
        for j in 0..cfg.p {
            for k in 0..cfg.p {
                if j != k {
                    assert!(oracle.rho[(j, k)].abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn ols_oracle_variance_matches_monte_carlo() {
        let mut cfg = base_cfg(SimModel::M7);
        cfg.n = 5000;
        cfg.p = 4;
        cfg.sigma_y = 1.5;
        let oracle = ols_oracles(&cfg).unwrap();
        // Monte Carlo sqrt(n)(alpha_hat - alpha) over replications
        let reps = 400;
        let mut sum = DMatrix::zeros(4, 4);
        for rep in 0..reps {
            let data = generate(&cfg, rep).unwrap();
            let fit = crate::estimators::fit_ols(&data).unwrap();
            let alpha_hat: Vec<f64> = fit.diagnostics["alpha_hat"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            let dev = DVector::from_fn(4, |j, _| {
                (alpha_hat[j] - oracle.alpha[j]) * (cfg.n as f64).sqrt()
            });
            sum += &dev * dev.transpose();
        }
        let mc = sum / reps as f64;
        // compare the dominant diagonal entries within 10%
        for j in 0..4 {
            let reference = oracle.var_alpha[(j, j)];
            assert!(
                (mc[(j, j)] - reference).abs() < 0.10 * reference,
                "Var(alpha_hat)[{j},{j}]: mc {} vs formula {}",
                mc[(j, j)],
                reference
            );
        }
    }

    #[test]
    fn slice_gap_limits() {
        let mut cfg = base_cfg(SimModel::M19Exactfit);
        cfg.sigma_y = 2.0;
        cfg.k = 1.0;
        // h = 1: no slicing, gap = Gamma Gamma' sigma_Y^2
        let gap1 = delta_sir_gap(&cfg, 1).unwrap();
        let gamma = cfg.gamma_vector();
        let expected = &gamma * gamma.transpose() * 4.0;
        assert!((gap1 - expected).abs().max() < 1e-6);

        // gap shrinks toward zero as h grows
        let g8 = delta_sir_gap(&cfg, 8).unwrap().abs().max();
        let g64 = delta_sir_gap(&cfg, 64).unwrap().abs().max();
        let g512 = delta_sir_gap(&cfg, 512).unwrap().abs().max();
        assert!(g8 > g64 && g64 > g512);
        assert!(g512 < 0.01 * 4.0);
    }

    #[test]
    fn within_slice_variance_matches_monte_carlo() {
        let sigma_y = 15.0;
        let h = 8;
        let formula = expected_within_slice_variance(sigma_y, h).unwrap();

        // Monte Carlo: slice a large normal sample into equal-count bins
        let mut rng = stream_rng(7, 0, 40);
        let n = 400_000;
        let mut ys: Vec<f64> = standard_normal_vector(&mut rng, n)
            .iter()
            .map(|z| z * sigma_y)
            .collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        for k in 0..h {
            let lo = k * n / h;
            let hi = (k + 1) * n / h;
            let slice = &ys[lo..hi];
            let mean: f64 = slice.iter().sum::<f64>() / slice.len() as f64;
            let var: f64 =
                slice.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / slice.len() as f64;
            acc += var * slice.len() as f64 / n as f64;
        }
        assert!(
            (formula - acc).abs() < 0.01 * formula,
            "quadrature {formula} vs Monte Carlo {acc}"
        );
    }
}
