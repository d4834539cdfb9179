//! Command-line front end: JSON configs in, CSV/JSON artifacts out.
//!
//! Exit codes: 0 success, 1 domain failure (certificate, divergence, I/O),
//! 2 usage or parse error.

pub mod commands;
pub mod config;
pub mod examples;
pub mod fixtures;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{CliError, Format, Options, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "cubic-obs", version, about = "Design, certify and simulate cubic observers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output file (design, simulate, sweep-gamma) or directory (example).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Integration step in seconds.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Simulated time in seconds.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Perturbation `A + eps I`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Comma-separated gamma values.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub gammas: Option<Vec<f64>>,
    /// Seed of the equilibrium-search diagnostic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Run sweeps and searches on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the observer and print design plus certificate JSON.
    Design { config: PathBuf },
    /// Simulate plant and observer; write the trace, print metrics JSON.
    Simulate { config: PathBuf },
    /// Write the output bundle of a built-in example (1, 2 or 3).
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        n: u8,
    },
    /// One metrics row per gamma.
    SweepGamma { config: PathBuf },
}

impl Cli {
    pub fn options(&self, env_out_dir: Option<PathBuf>) -> Options {
        Options {
            out: self.out.clone(),
            dt: self.dt,
            horizon: self.horizon,
            eps: self.eps,
            gammas: self.gammas.clone(),
            seed: self.seed,
            format: self.format,
            env_out_dir,
            exec: if self.sequential {
                crate::par::Execution::Sequential
            } else {
                crate::par::Execution::Parallel
            },
        }
    }
}

/// Runs a parsed command line, printing diagnostics to `stderr`. Returns
/// the exit code.
pub fn run(cli: &Cli, env_out_dir: Option<PathBuf>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let opts = cli.options(env_out_dir);
    let result = match &cli.command {
        Command::Design { config } => commands::cmd_design(config, &opts, stdout),
        Command::Simulate { config } => commands::cmd_simulate(config, &opts, stdout),
        Command::Example { n } => commands::cmd_example(*n, &opts, stdout),
        Command::SweepGamma { config } => commands::cmd_sweep_gamma(config, &opts, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code
        }
    }
}
