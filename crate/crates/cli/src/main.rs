//! `ddpgp`: simulate, fit, predict and evaluate treatment regimes from the
//! command line. Commands print a JSON summary on success, or CSV for table
//! commands run without `--out`. On failure the error is printed to stderr
//! as `{"error": {"kind", "message"}}` and the exit code is nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ddpgp_core::McmcConfig;
use serde_json::json;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "ddpgp",
    version,
    about = "DDP-GP survival regression and dynamic treatment regime evaluation"
)]
struct Cli {
    /// Also write the error JSON to this file on failure.
    #[arg(long, global = true)]
    error_json: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a simulated dataset.
    Simulate(SimulateArgs),
    /// Fit every transition of a pathway dataset.
    Fit(FitArgs),
    /// Predictive survival curve of one transition at given covariates.
    PredictSurvival(PredictArgs),
    /// Mean overall survival of every regime by G-computation and IPTW.
    EvaluateRegimes(EvaluateArgs),
    /// Average treatment effect on single-stage treatment data.
    TreatmentEffect(TreatmentArgs),
    /// Run many replicates of a simulation study.
    ReplicateStudy(ReplicateArgs),
    /// Effective sample sizes and chain summaries of a fit.
    Diagnostics(DiagnosticsArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum StudyArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    Leukemia,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    study: StudyArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target censoring fraction (studies 1 and 3).
    #[arg(long)]
    censoring: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct McmcArgs {
    #[arg(long, default_value_t = 2000)]
    burn_in: usize,
    /// Total sweeps including burn-in.
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Mixture truncation level.
    #[arg(long, default_value_t = ddpgp_core::model::DEFAULT_TRUNCATION)]
    truncation: usize,
}

impl McmcArgs {
    fn config(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            burn_in: self.burn_in,
            total: self.iterations,
            thin: self.thin,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct GcompArgs {
    /// Forward simulations per posterior draw and baseline subject.
    #[arg(long, default_value_t = 10)]
    n_paths: usize,
    /// Use at most this many posterior draws.
    #[arg(long)]
    max_draws: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Pathway CSV.
    #[arg(long)]
    data: PathBuf,
    /// Graph JSON.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Fit directory.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    transition: String,
    /// Raw covariate vector of the transition, comma separated (intercept included).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Last time of the grid, days.
    #[arg(long)]
    t_max: f64,
    /// Grid points after t = 0.
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Pathway CSV supplying the baseline sample and the IPTW data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    gcomp: GcompArgs,
    /// Skip the IPTW comparator.
    #[arg(long)]
    no_iptw: bool,
}

#[derive(Args, Debug)]
struct TreatmentArgs {
    /// Treatment CSV with columns L, W, z, y (and optionally y1, y0).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    #[arg(long, value_enum)]
    study: StudyArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    censoring: Option<f64>,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Replicate r uses a seed derived from `base_seed` and r.
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "DDPGP_JOBS")]
    jobs: Option<usize>,
    /// Trajectories per regime for the study-3 truth table (0 skips it).
    #[arg(long, default_value_t = 100_000)]
    truth_trajectories: usize,
    /// Reuse per-replicate files already present in the output directory.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[command(flatten)]
    gcomp: GcompArgs,
}

#[derive(Args, Debug)]
struct DiagnosticsArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn fail(error_file: Option<&PathBuf>, kind: &str, message: &str, code: u8) -> ExitCode {
    let body = error_json(kind, message);
    eprintln!("{body}");
    if let Some(p) = error_file {
        if let Err(e) = ddpgp_core::io::write_atomic(p, format!("{body}\n").as_bytes()) {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
        }
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            // The error file flag may be unparseable itself; look for it by hand.
            let args: Vec<String> = std::env::args().collect();
            let file = args
                .iter()
                .position(|a| a == "--error-json")
                .and_then(|i| args.get(i + 1))
                .map(PathBuf::from);
            return fail(file.as_ref(), "usage", e.to_string().trim(), 2);
        }
    };
    match commands::run(cli.command) {
        Ok(commands::Output::Json(summary)) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Ok(commands::Output::Text(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(cli.error_json.as_ref(), e.kind(), &e.to_string(), 1),
    }
}
