//! Presets that reproduce the published simulation study designs. Parameter
//! values are fixed by the studies themselves; sweep grids default to
//! readable ranges and can be overridden with --grid.

use pfc_core::basis::BasisKind;
use pfc_core::estimators::Strategy;
use pfc_core::simulate::{EstimatorSpec, SimConfig, SimModel, Sweep, SweepParam};

use crate::CliError;

pub const FIGURE_NAMES: [&str; 10] = ["1a", "1b", "1c", "1d", "2a", "2b", "2c", "2d", "3a", "3b"];

pub fn preset(name: &str, reps: usize, seed: u64, grid: Option<Vec<f64>>) -> Result<SimConfig, CliError> {
    let fig1_estimators = vec![
        EstimatorSpec::Ols,
        EstimatorSpec::Pc,
        EstimatorSpec::Pfc {
            basis: BasisKind::Linear,
        },
    ];
    let xpfc = |strategy: Strategy| EstimatorSpec::ExtendedPfc {
        basis: BasisKind::Slices(8),
        strategy,
    };
    let fig3_estimators = vec![
        EstimatorSpec::Ols,
        EstimatorSpec::GeneralPfc {
            basis: BasisKind::Polynomial(3),
        },
        EstimatorSpec::Sir { slices: 8 },
        EstimatorSpec::PfcTrueDelta { slices: 8 },
    ];

    let mut cfg = SimConfig {
        reps,
        seed,
        ..SimConfig::default()
    };
    let sweep = |param: SweepParam, default: &[f64]| Sweep {
        param,
        values: grid.clone().unwrap_or_else(|| default.to_vec()),
    };

    match name {
        "1a" => {
            cfg.model = SimModel::M7;
            cfg.sigma_y = 1.0;
            cfg.sigma = 1.0;
            cfg.estimators = fig1_estimators;
            cfg.sweep = Some(sweep(SweepParam::N, &[20.0, 40.0, 60.0, 100.0, 150.0, 250.0]));
        }
        "1b" | "1d" => {
            cfg.model = SimModel::M7;
            cfg.n = 40;
            cfg.sigma = 1.0;
            cfg.estimators = fig1_estimators;
            cfg.sweep = Some(sweep(
                SweepParam::SigmaY,
                &[0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0],
            ));
            cfg.compute_mse = name == "1d";
        }
        "1c" => {
            cfg.model = SimModel::M7;
            cfg.n = 40;
            cfg.sigma_y = 1.0;
            cfg.estimators = fig1_estimators;
            cfg.sweep = Some(sweep(SweepParam::Sigma, &[0.25, 0.5, 1.0, 2.0, 3.0, 5.0]));
        }
        "2a" => {
            cfg.model = SimModel::M12;
            cfg.n = 250;
            cfg.sigma_y = 1.0;
            cfg.sigma_0 = 1.0;
            cfg.estimators = vec![
                EstimatorSpec::Ols,
                EstimatorSpec::Sir { slices: 8 },
                xpfc(Strategy::PfcPc),
            ];
            cfg.sweep = Some(sweep(
                SweepParam::Sigma,
                &[0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            ));
        }
        "2b" => {
            cfg.model = SimModel::M12;
            cfg.n = 250;
            cfg.sigma = 1.0;
            cfg.sigma_0 = 1.0;
            cfg.estimators = vec![
                EstimatorSpec::Ols,
                EstimatorSpec::Sir { slices: 8 },
                xpfc(Strategy::PfcPc),
            ];
            cfg.sweep = Some(sweep(
                SweepParam::SigmaY,
                &[0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0],
            ));
        }
        "2c" => {
            cfg.model = SimModel::M12;
            cfg.n = 250;
            cfg.sigma = 1.0;
            cfg.sigma_y = 1.0;
            cfg.estimators = vec![
                EstimatorSpec::Ols,
                EstimatorSpec::Sir { slices: 8 },
                xpfc(Strategy::PfcPc),
            ];
            cfg.sweep = Some(sweep(
                SweepParam::Sigma0,
                &[0.25, 0.5, 0.75, 1.0, 1.25, std::f64::consts::SQRT_2, 1.5, 2.0, 3.0],
            ));
        }
        "2d" => {
            cfg.model = SimModel::M12;
            cfg.n = 250;
            cfg.sigma = 1.0;
            cfg.sigma_y = 1.0;
            cfg.estimators = vec![
                EstimatorSpec::Ols,
                EstimatorSpec::Sir { slices: 8 },
                xpfc(Strategy::PfcPc),
                xpfc(Strategy::PfcAll),
                xpfc(Strategy::Grassmann),
            ];
            cfg.sweep = Some(sweep(
                SweepParam::Sigma0,
                &[0.25, 0.5, 0.75, 1.0, 1.25, std::f64::consts::SQRT_2, 1.5, 2.0, 3.0],
            ));
        }
        "3a" => {
            cfg.model = SimModel::M19;
            cfg.sigma_y = 15.0;
            cfg.estimators = fig3_estimators;
            cfg.sweep = Some(sweep(SweepParam::N, &[50.0, 100.0, 150.0, 200.0, 250.0]));
        }
        "3b" => {
            cfg.model = SimModel::M19Exactfit;
            cfg.n = 50;
            cfg.sigma_y = 15.0;
            cfg.estimators = fig3_estimators;
            cfg.sweep = Some(sweep(SweepParam::K, &[0.0, 1.0, 2.0, 3.0, 4.0]));
        }
        _ => {
            return Err(CliError::input(format!(
                "unknown figure preset '{name}' (expected one of {})",
                FIGURE_NAMES.join(", ")
            )))
        }
    }
    Ok(cfg)
}
