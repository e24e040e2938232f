//! Command-line driver for the critical minimization solver.
//!
//! Subcommands map one-to-one to output artifacts: `spectrum` tabulates the
//! low Dirichlet spectrum, `minimize` runs the relaxed minimization and
//! exports the certified minimizer, `sweep` repeats it over a grid of
//! spectral parameters, `mass` and `lambda-star` evaluate the Green-function
//! mass and locate its sign change, and `verify` runs the built-in identity
//! checks.  All files are written with fixed key order, fixed row order, and
//! 17-significant-digit floats, so reruns with the same configuration and
//! seed are byte-identical.

mod commands;
mod config;
mod emit;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use critmin_core::error::CoreError;

use crate::config::RunConfig;

/// Driver-level failure, tagged with the process exit code: configuration
/// and input errors exit 2, solver breakdowns exit 3, red verification
/// checks exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    VerifyFailed(usize),
}

impl CliError {
    /// Sort a core failure into the configuration or solver bucket.  Domain,
    /// precondition, probe, and near-spectrum errors are caused by the run
    /// configuration; everything else is a numerical breakdown.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::InvalidDomain(_)
            | CoreError::Precondition(_)
            | CoreError::NonFinite(_)
            | CoreError::ProbeTooClose { .. }
            | CoreError::NearSpectrum { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

/// Shared state handed to every subcommand: the parsed configuration (absent
/// only for `verify`), the resolved output directory, and the effective
/// thread count and seed.
pub struct Ctx {
    pub cfg: Option<RunConfig>,
    pub out: PathBuf,
    pub threads: usize,
    pub seed: u64,
}

impl Ctx {
    pub fn cfg(&self) -> Result<&RunConfig, CliError> {
        self.cfg.as_ref().ok_or_else(|| {
            CliError::Config("this subcommand needs --config <path>".into())
        })
    }
}

#[derive(Parser)]
#[command(
    name = "critmin",
    version,
    about = "Weighted critical-exponent minimization on balls and boxes"
)]
struct Cli {
    /// Flat `section.key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the `output.directory` key.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid sweeps; file writing stays single-threaded.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Random seed; overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the low Dirichlet spectrum with multiplicity clusters.
    Spectrum,
    /// Minimize at `problem.lambda` and export the certified minimizer.
    Minimize,
    /// Minimize across `problem.lambda_grid` and tabulate the runs.
    Sweep,
    /// Evaluate the Green-function mass at the configured probes.
    Mass,
    /// Locate the mass sign change inside spectral interval `problem.interval`.
    LambdaStar,
    /// Run the built-in identity and oracle checks.
    Verify {
        /// Invert one verdict to exercise the failure path.
        #[arg(long)]
        inject_fault: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            Some(RunConfig::parse(&text)?)
        }
        None => None,
    };
    let out = cli
        .out
        .or_else(|| cfg.as_ref().and_then(|c| c.directory.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    let seed = cli.seed.unwrap_or_else(|| cfg.as_ref().map_or(0, |c| c.seed));
    let ctx = Ctx { cfg, out, threads: cli.threads.max(1), seed };

    match cli.command {
        Command::Spectrum => commands::cmd_spectrum(&ctx),
        Command::Minimize => commands::cmd_minimize(&ctx),
        Command::Sweep => commands::cmd_sweep(&ctx),
        Command::Mass => commands::cmd_mass(&ctx),
        Command::LambdaStar => commands::cmd_lambda_star(&ctx),
        Command::Verify { inject_fault } => verify::cmd_verify(&ctx, inject_fault),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(msg) => eprintln!("configuration error: {msg}"),
                CliError::Solver(msg) => eprintln!("solver error: {msg}"),
                CliError::VerifyFailed(n) => {
                    eprintln!("verification failed: {n} check(s) did not pass")
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
