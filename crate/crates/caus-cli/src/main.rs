//! `caus`: fit a contextual mixture, calibrate uncertainty sets, and solve
//! robust unit commitment against them.
//!
//! Pipeline: `gen-data` (demo history) -> `fit` -> `calibrate` ->
//! `build-set` -> `solve` -> `evaluate`, plus `compare` which runs the
//! deterministic, stochastic, and robust variants side by side.

mod commands;
mod io;
mod meta;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn from_core(e: impl std::fmt::Display) -> CliError {
        CliError::InvalidConfig(e.to_string())
    }

    /// Documented exit codes: 2 parse, 3 missing input, 4 invalid
    /// configuration, 5 solver failure, 6 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::InvalidConfig(_) => 4,
            CliError::Solver(_) => 5,
            CliError::Io(_) => 6,
        }
    }
}

#[derive(Parser)]
#[command(name = "caus", version, about = "Contextual uncertainty sets for robust unit commitment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic (covariate, wind) history CSV for demos.
    GenData {
        #[arg(long, default_value = "history.csv")]
        out: PathBuf,
        /// Rows to generate.
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Period labels to cycle through.
        #[arg(long, default_value_t = 4)]
        periods: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a joint Gaussian mixture to a history CSV.
    Fit {
        #[arg(long)]
        history: PathBuf,
        /// Mixture components.
        #[arg(long, short)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Calibrate per-period radii from conditional samples.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        /// Covariates CSV (period, x_1..x_n), one row per period.
        #[arg(long)]
        covariates: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Conditional samples per period (N_s).
        #[arg(long, default_value_t = 10000)]
        ns: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Replace every radius with the maximum across periods.
        #[arg(long, default_value_t = false)]
        share_gamma: bool,
        #[arg(long, default_value = "radii.json")]
        out: PathBuf,
        /// Optional CSV of the period-1 score histogram (score, count).
        #[arg(long)]
        scores_csv: Option<PathBuf>,
    },
    /// Build an uncertainty set file (caus, box, or uos baseline).
    BuildSet {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        /// Radii file (required for caus).
        #[arg(long)]
        radii: Option<PathBuf>,
        /// Set family.
        #[arg(long, default_value = "caus")]
        set: String,
        /// Supporting halfspaces per subset (default max(8, 2m+2)).
        #[arg(long, short)]
        j: Option<usize>,
        /// Samples for the box bounds (reuse the calibration seed/count so
        /// the box bounds the calibration sample).
        #[arg(long, default_value_t = 10000)]
        ns: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Baseline scaling (default sqrt of the chi-square 0.95 quantile).
        #[arg(long)]
        lambda: Option<f64>,
        /// Baseline budget per component (default m).
        #[arg(long)]
        phi: Option<f64>,
        /// Solver backend (highs or exact; default from CAUS_BACKEND).
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value = "set.json")]
        out: PathBuf,
    },
    /// Solve the robust unit commitment against a set file.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        set: PathBuf,
        /// Worst-case subproblem: enum or milp.
        #[arg(long, default_value = "enum")]
        subproblem: String,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        /// Solver backend (highs or exact; default from CAUS_BACKEND).
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
    },
    /// Out-of-sample reliability of a solved commitment.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        /// Fresh realizations.
        #[arg(long, default_value_t = 10000)]
        n: usize,
        #[arg(long, default_value_t = 777)]
        seed: u64,
        /// Solver backend (highs or exact; default from CAUS_BACKEND).
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Optional CSV histogram of recourse costs (cost, count).
        #[arg(long)]
        costs_csv: Option<PathBuf>,
    },
    /// Run the full method comparison from a config file.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "compare-out")]
        out_dir: PathBuf,
        /// Solver backend (highs or exact; default from CAUS_BACKEND).
        #[arg(long)]
        backend: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData { out, count, periods, seed } => {
            commands::gen_data(&out, count, periods, seed)
        }
        Command::Fit { history, k, seed, out } => commands::fit(&history, k, seed, &out),
        Command::Calibrate {
            model,
            covariates,
            epsilon,
            ns,
            seed,
            share_gamma,
            out,
            scores_csv,
        } => commands::calibrate_cmd(
            &model,
            &covariates,
            epsilon,
            ns,
            seed,
            share_gamma,
            &out,
            scores_csv.as_deref(),
        ),
        Command::BuildSet {
            model,
            covariates,
            radii,
            set,
            j,
            ns,
            seed,
            lambda,
            phi,
            backend,
            out,
        } => commands::build_set(
            &model,
            &covariates,
            radii.as_deref(),
            &set,
            j,
            ns,
            seed,
            lambda,
            phi,
            backend.as_deref(),
            &out,
        ),
        Command::Solve { instance, set, subproblem, tol, max_iters, backend, out } => {
            commands::solve_cmd(&instance, &set, &subproblem, tol, max_iters, backend.as_deref(), &out)
        }
        Command::Evaluate {
            instance,
            solution,
            model,
            covariates,
            n,
            seed,
            backend,
            out,
            costs_csv,
        } => commands::evaluate_cmd(
            &instance,
            &solution,
            &model,
            &covariates,
            n,
            seed,
            backend.as_deref(),
            &out,
            costs_csv.as_deref(),
        ),
        Command::Compare { config, out_dir, backend } => {
            commands::compare_cmd(&config, &out_dir, backend.as_deref())
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
