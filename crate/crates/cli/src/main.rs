//! `pfc` command-line tool: dataset fitting, dimension selection, simulation
//! studies and figure-table reproduction on top of the pfc-core library.

mod csvio;
mod figures;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pfc_core::basis::{build_basis, BasisKind};
use pfc_core::estimators::{
    fit_extended_pc, fit_extended_pfc, fit_general_pfc, fit_general_pfc_known_delta, fit_ols,
    fit_pc, fit_pfc_iso, fit_sir, FittedReduction, Strategy,
};
use pfc_core::expfam::{fit_bernoulli_pc_dataset, BernoulliFitOptions};
use pfc_core::linalg::subspace_angle;
use pfc_core::moments::Dataset;
use pfc_core::selection::{select_d, table_json};
use pfc_core::simulate::{run_study, SimConfig};

/// Error with the process exit code it maps to: 2 for malformed input or
/// configuration, 3 for a failed fit or computation.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn fit(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<pfc_core::Error> for CliError {
    fn from(e: pfc_core::Error) -> Self {
        CliError::fit(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "pfc", version, about = "Model-based sufficient dimension reduction")]
struct Cli {
    /// Worker threads for parallel replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a reduction to a CSV dataset.
    Fit(FitArgs),
    /// Likelihood-ratio tests of the reductive dimension.
    SelectDim(SelectDimArgs),
    /// Run a custom simulation study from a JSON config.
    Simulate(SimulateArgs),
    /// Reproduce one of the published simulation study tables.
    ReproduceFigure(FigureArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
    /// Export (predictor, x, y) columns for external inverse response plots.
    InversePlotData(PlotDataArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Pc,
    Pfc,
    Xpc,
    Xpfc,
    Gpfc,
    Sir,
    Ols,
    Bpc,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: String,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Reduction dimension.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Basis spec: linear, poly:K, slices:H, fourier:K.
    #[arg(long, default_value = "linear")]
    basis: String,
    /// Search strategy for xpfc: pfc-pc, pfc-all, sequential, grassmann.
    #[arg(long, default_value = "grassmann")]
    strategy: String,
    /// Slice count for sir.
    #[arg(long, default_value_t = 8)]
    slices: usize,
    /// Known Delta matrix (headerless CSV) for gpfc.
    #[arg(long)]
    delta_file: Option<String>,
    /// Assert 0/1 predictors (required by bpc).
    #[arg(long, default_value_t = false)]
    binary: bool,
    /// Prefix for the fit document, reduced CSV and manifest.
    #[arg(long, default_value = "pfc_fit")]
    out_prefix: String,
}

#[derive(Args)]
struct SelectDimArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    response: String,
    #[arg(long, default_value = "linear")]
    basis: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "pfc_select")]
    out_prefix: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON study configuration.
    #[arg(long)]
    config: String,
    #[arg(long, default_value = "pfc_study")]
    out_prefix: String,
}

#[derive(Args)]
struct FigureArgs {
    /// Figure name: 1a, 1b, 1c, 1d, 2a, 2b, 2c, 2d, 3a or 3b.
    figure: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Override the sweep grid (comma-separated values).
    #[arg(long)]
    grid: Option<String>,
    /// Output prefix; defaults to figure_<name>.
    #[arg(long)]
    out_prefix: Option<String>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest written by a previous run.
    manifest: String,
}

#[derive(Args)]
struct PlotDataArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    response: String,
    #[arg(long, default_value = "inverse_plot_data.csv")]
    out: String,
}

fn main() -> std::process::ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore failure when a pool exists already (e.g. inside replay)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command, &argv) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::ExitCode::from(e.code)
        }
    }
}

fn dispatch(command: Command, argv: &[String]) -> Result<(), CliError> {
    match command {
        Command::Fit(args) => cmd_fit(args, argv),
        Command::SelectDim(args) => cmd_select_dim(args, argv),
        Command::Simulate(args) => cmd_simulate(args, argv),
        Command::ReproduceFigure(args) => cmd_reproduce_figure(args, argv),
        Command::Replay(args) => cmd_replay(args),
        Command::InversePlotData(args) => cmd_inverse_plot_data(args, argv),
    }
}

fn parse_basis(spec: &str) -> Result<BasisKind, CliError> {
    spec.parse::<BasisKind>()
        .map_err(|e| CliError::input(e.to_string()))
}

fn run_fit_method(args: &FitArgs, data: &Dataset) -> Result<FittedReduction, CliError> {
    let fit = match args.method {
        MethodArg::Pc => fit_pc(data, args.d)?,
        MethodArg::Xpc => fit_extended_pc(data, args.d)?,
        MethodArg::Pfc => {
            let basis = build_basis(&data.y, parse_basis(&args.basis)?)?;
            fit_pfc_iso(data, &basis, args.d)?
        }
        MethodArg::Xpfc => {
            let basis = build_basis(&data.y, parse_basis(&args.basis)?)?;
            let strategy: Strategy = args
                .strategy
                .parse()
                .map_err(|e: pfc_core::Error| CliError::input(e.to_string()))?;
            fit_extended_pfc(data, &basis, args.d, strategy)?
        }
        MethodArg::Gpfc => {
            let basis = build_basis(&data.y, parse_basis(&args.basis)?)?;
            match &args.delta_file {
                Some(path) => {
                    let delta = csvio::read_square_matrix(path)?;
                    fit_general_pfc_known_delta(data, &basis, args.d, &delta)?
                }
                None => fit_general_pfc(data, &basis, args.d)?,
            }
        }
        MethodArg::Sir => fit_sir(data, args.slices, args.d)?,
        MethodArg::Ols => {
            if args.d != 1 {
                return Err(CliError::input("--method ols always fits d = 1"));
            }
            fit_ols(data)?
        }
        MethodArg::Bpc => {
            if !args.binary {
                return Err(CliError::input(
                    "--method bpc requires --binary to assert 0/1 predictors",
                ));
            }
            let opts = BernoulliFitOptions::default();
            let (_, fit) = fit_bernoulli_pc_dataset(data, args.d, &opts)?;
            fit
        }
    };
    Ok(fit)
}

fn cmd_fit(args: FitArgs, argv: &[String]) -> Result<(), CliError> {
    let data = csvio::read_dataset(&args.input, &args.response)?;
    let fit = run_fit_method(&args, &data)?;

    let doc_path = format!("{}.json", args.out_prefix);
    let reduced_path = format!("{}_reduced.csv", args.out_prefix);
    let manifest_path = format!("{}_manifest.json", args.out_prefix);

    let doc = fit.to_json();
    std::fs::write(&doc_path, serde_json::to_string_pretty(&doc).unwrap())
        .map_err(|e| CliError::input(format!("cannot write {doc_path}: {e}")))?;
    let reduced = fit.reduce(&data.x)?;
    csvio::write_reduced_csv(&reduced_path, &reduced, &data.y)?;

    manifest::ManifestBuilder::new("fit", argv)
        .config(json!({
            "input": args.input,
            "response": args.response,
            "method": fit.method.as_str(),
            "d": fit.d,
            "basis": fit.basis_kind.map(|b| b.to_string()),
            "strategy": args.strategy,
            "slices": args.slices,
            "delta_file": args.delta_file,
        }))
        .output(&doc_path)
        .output(&reduced_path)
        .write(&manifest_path)?;

    // orientation aid: angle between the fitted subspace and the span of
    // the first d sample PC directions
    let pc_angle = if fit.d < data.p() {
        fit_pc(&data, fit.d)
            .ok()
            .and_then(|pc| subspace_angle(&fit.subspace, &pc.subspace).ok())
    } else {
        None
    };
    match pc_angle {
        Some(a) => println!(
            "method={} d={} loglik={} angle_to_pc_axes_deg={a:.4}",
            fit.method, fit.d, fit.loglik
        ),
        None => println!("method={} d={} loglik={}", fit.method, fit.d, fit.loglik),
    }
    Ok(())
}

fn cmd_select_dim(args: SelectDimArgs, argv: &[String]) -> Result<(), CliError> {
    let data = csvio::read_dataset(&args.input, &args.response)?;
    let basis = build_basis(&data.y, parse_basis(&args.basis)?)?;
    let table = select_d(&data, &basis, args.alpha)?;

    let csv_path = format!("{}_dimension_tests.csv", args.out_prefix);
    let manifest_path = format!("{}_manifest.json", args.out_prefix);
    std::fs::write(&csv_path, table.to_csv())
        .map_err(|e| CliError::input(format!("cannot write {csv_path}: {e}")))?;
    manifest::ManifestBuilder::new("select-dim", argv)
        .config(table_json(&table))
        .output(&csv_path)
        .write(&manifest_path)?;

    print!("{}", table.to_csv());
    println!("chosen_d={}", table.chosen_d);
    Ok(())
}

fn write_study_outputs(
    table: &pfc_core::simulate::StudyTable,
    cfg: &SimConfig,
    command: &str,
    argv: &[String],
    out_prefix: &str,
    log_angle_plot: bool,
) -> Result<(), CliError> {
    let csv_path = format!("{out_prefix}_study.csv");
    let plot_path = format!("{out_prefix}_plot.gp");
    let manifest_path = format!("{out_prefix}_manifest.json");
    std::fs::write(&csv_path, table.to_csv())
        .map_err(|e| CliError::input(format!("cannot write {csv_path}: {e}")))?;
    let csv_filename = std::path::Path::new(&csv_path)
        .file_name()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| csv_path.clone());
    std::fs::write(
        &plot_path,
        table.gnuplot_script_scaled(&csv_filename, log_angle_plot),
    )
    .map_err(|e| CliError::input(format!("cannot write {plot_path}: {e}")))?;
    manifest::ManifestBuilder::new(command, argv)
        .config(serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null))
        .seed(cfg.seed)
        .output(&csv_path)
        .output(&plot_path)
        .write(&manifest_path)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.config)))?;
    let cfg: SimConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: bad study config: {e}", args.config)))?;
    let table = run_study(&cfg)?;
    write_study_outputs(&table, &cfg, "simulate", argv, &args.out_prefix, false)
}

fn cmd_reproduce_figure(args: FigureArgs, argv: &[String]) -> Result<(), CliError> {
    let grid = match &args.grid {
        Some(spec) => Some(
            spec.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::input(format!("bad grid value '{v}'")))
                })
                .collect::<Result<Vec<f64>, CliError>>()?,
        ),
        None => None,
    };
    let cfg = figures::preset(&args.figure, args.reps, args.seed, grid)?;
    let out_prefix = args
        .out_prefix
        .clone()
        .unwrap_or_else(|| format!("figure_{}", args.figure));
    let table = run_study(&cfg)?;
    let log_plot = args.figure.starts_with('3');
    write_study_outputs(&table, &cfg, "reproduce-figure", argv, &out_prefix, log_plot)
}

fn cmd_replay(args: ReplayArgs) -> Result<(), CliError> {
    let argv = manifest::read_argv(&args.manifest)?;
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| CliError::input(format!("manifest argv does not parse: {e}")))?;
    dispatch(cli.command, &argv)
}

fn cmd_inverse_plot_data(args: PlotDataArgs, argv: &[String]) -> Result<(), CliError> {
    let data = csvio::read_dataset(&args.input, &args.response)?;
    let names: Vec<String> = data
        .column_names
        .clone()
        .unwrap_or_else(|| (0..data.p()).map(|j| format!("x{}", j + 1)).collect());
    let mut out = String::from("predictor,x,y\n");
    for (j, name) in names.iter().enumerate() {
        for i in 0..data.n() {
            out.push_str(&format!("{},{},{}\n", name, data.x[(i, j)], data.y[i]));
        }
    }
    std::fs::write(&args.out, &out)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", args.out)))?;
    manifest::ManifestBuilder::new("inverse-plot-data", argv)
        .output(&args.out)
        .write(&format!("{}.manifest.json", args.out))?;
    println!("wrote {} rows to {}", data.p() * data.n(), args.out);
    Ok(())
}
