//! Command-line driver for the stability toolkit: TOML configs, snapshots,
//! JSON reports, CSV series and SVG charts around `ns-stability-core`.
//!
//! Exit status: 0 success, 1 other IO failure, 2 config error, 3 corrupt
//! input file, 4 solver abort.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod snapshot;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;
pub use ns_stability_core as core;

#[derive(Debug, Parser)]
#[command(name = "ns-stability", version, about = "Stability certificates and experiments for periodic Navier-Stokes flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the base flow, the full 3D flow or the base/perturbation pair.
    Simulate(RunArgs),
    /// Evaluate the certificate without time stepping.
    Certify(RunArgs),
    /// Run a stability experiment and compare it with its certificate.
    Stability(RunArgs),
    /// Verify and summarize the artifacts of an earlier run.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML config; defaults apply to every missing key.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturbation seed (overrides `perturbation.seed` and any seed sweep).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweep points run concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write SVG charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory of a previous run.
    #[arg(long)]
    pub out: PathBuf,
    /// Regenerate SVG charts from the stored series.
    #[arg(long)]
    pub svg: bool,
}

/// Runs the command line with an explicit environment and returns the exit status.
pub fn main_with<A, T, E>(args: A, env: E) -> i32
where
    A: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    E: IntoIterator<Item = (String, String)>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let env: Vec<(String, String)> = env.into_iter().collect();
    let result = match &cli.command {
        Command::Simulate(a) => commands::run(commands::Kind::Simulate, a, env),
        Command::Certify(a) => commands::run(commands::Kind::Certify, a, env),
        Command::Stability(a) => commands::run(commands::Kind::Stability, a, env),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ns-stability: {e}");
            e.exit_code()
        }
    }
}
