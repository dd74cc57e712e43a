//! Command-line front end for robust discriminant analysis with
//! noise-resistant variable selection.

mod commands;
mod dataio;
mod error;
mod report;

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "redda",
    version,
    about = "Robust model-based discriminant analysis with noise-resistant variable selection",
    after_help = "Exit codes: 0 success, 1 validation error, 2 estimation error, 3 I/O error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the robust classifier on a training file.
    Fit(FitArgs),
    /// Greedy stepwise variable selection scored by trimmed BIC.
    SelectTbic(SelectTbicArgs),
    /// Maximum-likelihood subset selection with fixed subset size.
    SelectMlsubset(SelectMlsubsetArgs),
    /// Fit on a training file and predict labels for a test file.
    Predict(PredictArgs),
    /// Rank test rows by their fitted marginal density (lowest first).
    DetectOutliers(DetectOutliersArgs),
    /// Run the synthetic contaminated-benchmark experiment grid.
    Simulate(SimulateArgs),
    /// Monitor subset stability over a descending trimming grid.
    MonitorGamma(MonitorGammaArgs),
}

/// Flags shared by every command that reads a training file.
#[derive(Args, Serialize, Clone)]
struct TrainArgs {
    /// Training dataset (delimited text with a header row).
    #[arg(long)]
    train: String,
    /// Name of the label column.
    #[arg(long = "label-col")]
    label_col: String,
    /// Optional row-identifier column.
    #[arg(long = "id-col")]
    id_col: Option<String>,
}

#[derive(Args, Serialize, Clone)]
struct FitArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Restrict the fit to these variables (comma list of names or
    /// 1-based indices), e.g. from a previous selection report.
    #[arg(long)]
    vars: Option<String>,
    /// Trimming level in [0, 0.5).
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Covariance model code (EII VII EEI VEI EVI VVI EEE VVV).
    #[arg(long, default_value = "VVV")]
    model: String,
    /// Random concentration restarts.
    #[arg(long = "n-start", default_value_t = 50)]
    n_start: usize,
    #[arg(long = "max-iter", default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report destination (standard output when omitted). Not echoed
    /// into the report: its bytes depend only on computational inputs.
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Serialize, Clone)]
struct SelectTbicArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value = "VVV")]
    model: String,
    /// Random restarts per fitted model inside the search.
    #[arg(long = "n-start", default_value_t = 10)]
    n_start: usize,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Serialize, Clone)]
struct SelectMlsubsetArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Number of relevant variables to retain.
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value = "VVV")]
    model: String,
    /// Restarts of the whole M/S/T cycle.
    #[arg(long = "n-init", default_value_t = 20)]
    n_init: usize,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    /// Subset search strategy: auto, exhaustive or genetic.
    #[arg(long, default_value = "auto")]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Serialize, Clone)]
struct PredictArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Test dataset; the label column is not required.
    #[arg(long)]
    test: String,
    #[arg(long)]
    vars: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value = "VVV")]
    model: String,
    #[arg(long = "n-start", default_value_t = 50)]
    n_start: usize,
    #[arg(long = "max-iter", default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report a-posteriori labels for the trimmed training rows.
    #[arg(long, default_value_t = false)]
    reassign: bool,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Serialize, Clone)]
struct DetectOutliersArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    test: String,
    /// Variable selection before scoring: none, tbic or mlsubset.
    #[arg(long, default_value = "none")]
    select: String,
    /// Subset size for the mlsubset selector.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value = "VVV")]
    model: String,
    #[arg(long = "n-start", default_value_t = 10)]
    n_start: usize,
    #[arg(long = "n-init", default_value_t = 20)]
    n_init: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flag this many most-suspicious rows.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Serialize, Clone)]
struct SimulateArgs {
    /// Experiment configuration file (JSON); defaults reproduce the
    /// contaminated benchmark at desk scale.
    #[arg(long)]
    config: Option<String>,
    /// Override the number of replications.
    #[arg(long)]
    b: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the replication grid.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

#[derive(Args, Serialize, Clone)]
struct MonitorGammaArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Selector to monitor: tbic or mlsubset.
    #[arg(long)]
    method: String,
    /// Subset size for the mlsubset selector.
    #[arg(long)]
    p: Option<usize>,
    /// Descending comma-separated trimming grid, e.g. "0.15,0.10,0.05,0".
    #[arg(long = "gamma-grid", default_value = "0.15,0.10,0.05,0.02,0")]
    gamma_grid: String,
    #[arg(long = "n-start", default_value_t = 10)]
    n_start: usize,
    #[arg(long = "n-init", default_value_t = 20)]
    n_init: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<String>,
}

fn run(cli: Cli) -> error::Result<()> {
    match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::SelectTbic(args) => commands::select_tbic(args),
        Command::SelectMlsubset(args) => commands::select_mlsubset(args),
        Command::Predict(args) => commands::predict(args),
        Command::DetectOutliers(args) => commands::detect_outliers(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::MonitorGamma(args) => commands::monitor_gamma(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error[validation]: {e}");
            return ExitCode::from(1);
        }
    };
    let started = Instant::now();
    match run(cli) {
        Ok(()) => {
            // timing stays out of the report so report bytes depend only
            // on the configuration and seed
            eprintln!("completed in {} ms", started.elapsed().as_millis());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
