//! Replication harness: run estimators over simulated replications, sweep a
//! parameter, and tabulate angle and prediction-error summaries.
//!
//! Replications run in parallel; every replication draws from its own
//! counter-addressed stream, and results are aggregated in replication
//! order, so a (config, seed) pair yields bit-identical tables regardless
//! of thread count.


use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::basis::{build_basis, BasisKind};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_extended_pfc, fit_general_pfc, fit_general_pfc_known_delta, fit_ols, fit_pc, fit_pfc_iso,
    fit_sir, FittedReduction, Strategy,
};
use crate::linalg::{spd_power, subspace_angle, Subspace};
use crate::moments::Dataset;

use super::models::{generate, population_moments, SimConfig};
use super::rng::stream_rng;

/// An estimator to run inside a study; all studies estimate a
/// one-dimensional reduction, matching the comparisons they reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Ols,
    Pc,
    Pfc { basis: BasisKind },
    ExtendedPfc { basis: BasisKind, strategy: Strategy },
    Sir { slices: usize },
    GeneralPfc { basis: BasisKind },
    /// General PFC with the model's true Delta (m19 family).
    PfcTrueDelta { slices: usize },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Ols => "OLS".into(),
            EstimatorSpec::Pc => "PC".into(),
            EstimatorSpec::Pfc { basis } => format!("PFC[{basis}]"),
            EstimatorSpec::ExtendedPfc { basis, strategy } => {
                format!("XPFC[{basis},{strategy}]")
            }
            EstimatorSpec::Sir { slices } => format!("SIR[{slices}]"),
            EstimatorSpec::GeneralPfc { basis } => format!("GPFC[{basis}]"),
            EstimatorSpec::PfcTrueDelta { slices } => format!("PFC-Delta[{slices}]"),
        }
    }

    fn fit(&self, data: &Dataset, cfg: &SimConfig) -> Result<FittedReduction> {
        match self {
            EstimatorSpec::Ols => fit_ols(data),
            EstimatorSpec::Pc => fit_pc(data, 1),
            EstimatorSpec::Pfc { basis } => {
                let b = build_basis(&data.y, *basis)?;
                fit_pfc_iso(data, &b, 1)
            }
            EstimatorSpec::ExtendedPfc { basis, strategy } => {
                let b = build_basis(&data.y, *basis)?;
                fit_extended_pfc(data, &b, 1, *strategy)
            }
            EstimatorSpec::Sir { slices } => fit_sir(data, *slices, 1),
            EstimatorSpec::GeneralPfc { basis } => {
                let b = build_basis(&data.y, *basis)?;
                fit_general_pfc(data, &b, 1)
            }
            EstimatorSpec::PfcTrueDelta { slices } => {
                let b = build_basis(&data.y, BasisKind::Slices(*slices))?;
                let delta = cfg.delta()?;
                fit_general_pfc_known_delta(data, &b, 1, &delta)
            }
        }
    }
}

/// Aggregated results for one (sweep value, estimator) cell.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub sweep_value: f64,
    pub estimator: String,
    pub mean_angle_deg: f64,
    pub sd_angle_deg: f64,
    pub mean_mse: Option<f64>,
    pub n_fail: usize,
    /// Raw per-replication angles (successes only), kept for bootstrap
    /// comparisons; not serialized to CSV.
    pub angles: Vec<f64>,
    /// Winning candidate-set tallies for extended-PFC estimators.
    pub source_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct StudyTable {
    pub sweep_label: String,
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    /// CSV with the fixed columns sweep_param, estimator, mean_angle_deg,
    /// sd_angle_deg, mean_mse, n_fail.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep_param,estimator,mean_angle_deg,sd_angle_deg,mean_mse,n_fail\n");
        for row in &self.rows {
            let mse = row.mean_mse.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.sweep_value, row.estimator, row.mean_angle_deg, row.sd_angle_deg, mse, row.n_fail
            ));
        }
        out
    }

    /// Gnuplot script rendering mean angle against the swept parameter,
    /// one curve per estimator, reading the CSV alongside.
    pub fn gnuplot_script(&self, csv_filename: &str) -> String {
        self.gnuplot_script_scaled(csv_filename, false)
    }

    /// As [`Self::gnuplot_script`], optionally on a log angle axis (the
    /// exact-fit studies span several orders of magnitude).
    pub fn gnuplot_script_scaled(&self, csv_filename: &str, log_angle: bool) -> String {
        let mut estimators: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !estimators.contains(&row.estimator.as_str()) {
                estimators.push(&row.estimator);
            }
        }
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str(&format!("set xlabel '{}'\n", self.sweep_label));
        s.push_str("set ylabel 'mean angle (degrees)'\n");
        if log_angle {
            s.push_str("set logscale y\n");
        }
        s.push_str("set key top right\n");
        s.push_str("plot \\\n");
        let lines: Vec<String> = estimators
            .iter()
            .map(|est| {
                format!(
                    "  '{csv_filename}' using 1:($2 eq '{est}' ? $3 : 1/0) with linespoints title '{est}'"
                )
            })
            .collect();
        s.push_str(&lines.join(", \\\n"));
        s.push('\n');
        s
    }

    pub fn row(&self, sweep_value: f64, estimator: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| {
            r.estimator == estimator && (r.sweep_value - sweep_value).abs() < 1e-12
        })
    }
}

struct RepOutcome {
    angle: Option<f64>,
    mse: Option<f64>,
    source: Option<String>,
}

/// Closed-form expectation over future observations of the scaled
/// prediction MSE, for a d = 1 fit with forward coefficients (a, b) from
/// the training sample.
fn scaled_mse(fit: &FittedReduction, data: &Dataset, cfg: &SimConfig) -> Result<f64> {
    let pop = population_moments(cfg, BasisKind::Linear)?;
    let gamma = cfg.gamma_vector();
    let sy2 = cfg.sigma_y * cfg.sigma_y;

    // forward OLS of y on the reduced training predictor
    let reduced = fit.reduce(&data.x)?;
    let t = reduced.column(0);
    let n = data.n() as f64;
    let tbar = t.mean();
    let ybar = data.y.mean();
    let mut stt = 0.0;
    let mut sty = 0.0;
    for i in 0..data.n() {
        stt += (t[i] - tbar) * (t[i] - tbar);
        sty += (t[i] - tbar) * (data.y[i] - ybar);
    }
    if stt <= 0.0 {
        return Err(Error::FitFailure("degenerate reduced regressor".into()));
    }
    let b = sty / stt;
    let a = ybar - b * tbar;
    let _ = n;

    // E(Y - a - b w'X)^2 with (Y, X) from the population (zero means):
    // a^2 + sigma_Y^2 - 2 b w'Gamma sigma_Y^2 + b^2 w' Sigma w
    let w = fit.coordinate_map.column(0);
    let wg = w.dot(&gamma);
    let wsw = (fit.coordinate_map.transpose() * &pop.sigma * &fit.coordinate_map)[(0, 0)];
    let numerator = a * a + sy2 - 2.0 * b * wg * sy2 + b * b * wsw;

    // sigma^2_{Y|X} = sigma_Y^2 - sigma_Y^4 Gamma' Sigma^{-1} Gamma
    let sigma_inv = spd_power(&pop.sigma, -1.0)?;
    let cond_var = sy2 - sy2 * sy2 * gamma.dot(&(&sigma_inv * &gamma));
    Ok(numerator / cond_var)
}

/// Run the configured study: all sweep values x replications x estimators.
pub fn run_study(cfg: &SimConfig) -> Result<StudyTable> {
    cfg.validate()?;
    if cfg.estimators.is_empty() {
        return Err(Error::InvalidArgument("study has no estimators".into()));
    }
    let (sweep_label, values) = match &cfg.sweep {
        Some(sweep) => (sweep.param.label().to_string(), sweep.values.clone()),
        None => ("value".to_string(), vec![f64::NAN]),
    };

    let mut rows = Vec::new();
    for &value in &values {
        let mut cell_cfg = cfg.clone();
        if let Some(sweep) = &cfg.sweep {
            sweep.param.apply(&mut cell_cfg, value);
        }
        cell_cfg.validate()?;
        let truth = population_moments(&cell_cfg, BasisKind::Linear)?.true_subspace;

        let outcomes: Vec<Vec<RepOutcome>> = (0..cell_cfg.reps as u64)
            .into_par_iter()
            .map(|rep| run_replication(&cell_cfg, rep, &truth))
            .collect::<Result<Vec<_>>>()?;

        for (e_idx, est) in cell_cfg.estimators.iter().enumerate() {
            let mut angles = Vec::new();
            let mut mses = Vec::new();
            let mut n_fail = 0usize;
            let mut source_counts: BTreeMap<String, usize> = BTreeMap::new();
            for rep_outcomes in &outcomes {
                let o = &rep_outcomes[e_idx];
                match o.angle {
                    Some(a) => angles.push(a),
                    None => n_fail += 1,
                }
                if let Some(m) = o.mse {
                    mses.push(m);
                }
                if let Some(s) = &o.source {
                    *source_counts.entry(s.clone()).or_insert(0) += 1;
                }
            }
            let mean = mean(&angles);
            let sd = sd(&angles, mean);
            let mean_mse = if mses.is_empty() { None } else { Some(mean_of(&mses)) };
            rows.push(StudyRow {
                sweep_value: value,
                estimator: est.label(),
                mean_angle_deg: mean,
                sd_angle_deg: sd,
                mean_mse,
                n_fail,
                angles,
                source_counts,
            });
        }
    }
    Ok(StudyTable { sweep_label, rows })
}

fn run_replication(
    cfg: &SimConfig,
    rep: u64,
    truth: &Subspace,
) -> Result<Vec<RepOutcome>> {
    let data = generate(cfg, rep)?;
    let mut outcomes = Vec::with_capacity(cfg.estimators.len());
    for est in &cfg.estimators {
        let outcome = match est.fit(&data, cfg) {
            Ok(fit) => {
                let angle = subspace_angle(&fit.subspace, truth).ok();
                let mse = if cfg.compute_mse {
                    scaled_mse(&fit, &data, cfg).ok()
                } else {
                    None
                };
                let source = fit
                    .extended
                    .as_ref()
                    .map(|d| d.candidate_source.as_str().to_string());
                RepOutcome { angle, mse, source }
            }
            Err(_) => RepOutcome {
                angle: None,
                mse: None,
                source: None,
            },
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn mean_of(v: &[f64]) -> f64 {
    mean(v)
}

fn sd(v: &[f64], mean: f64) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Percentile bootstrap confidence interval for mean(a) - mean(b).
pub fn bootstrap_mean_diff_ci(
    a: &[f64],
    b: &[f64],
    iters: usize,
    level: f64,
    seed: u64,
) -> (f64, f64) {
    use rand::Rng;
    fn resample<R: Rng>(v: &[f64], rng: &mut R) -> Vec<f64> {
        (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect()
    }
    let mut rng = stream_rng(seed, 0, 50);
    let mut diffs = Vec::with_capacity(iters);
    for _ in 0..iters {
        let ma = mean(&resample(a, &mut rng));
        let mb = mean(&resample(b, &mut rng));
        diffs.push(ma - mb);
    }
    diffs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let lo_idx = ((1.0 - level) / 2.0 * iters as f64) as usize;
    let hi_idx = (((1.0 + level) / 2.0) * iters as f64) as usize;
    (
        diffs[lo_idx.min(iters - 1)],
        diffs[hi_idx.min(iters - 1)],
    )
}
