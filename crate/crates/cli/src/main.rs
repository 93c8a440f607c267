//! `palisade` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration or argument error, 3 file or
//! format error, 4 numerical instability, 5 optimizer stall.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use palisade_core::control::ControlMode;

#[derive(Parser, Debug)]
#[command(name = "palisade", version, about = "Glioma parameter estimation and pattern control")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `core.seed` from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Turn a tissue raster into a density field.
    Preprocess { image: PathBuf },
    /// Estimate the coefficient fields from a terminal density.
    Estimate { target: PathBuf },
    /// Optimize a neutralizing control for estimated coefficients.
    Neutralize {
        theta: PathBuf,
        /// Neutral density; falls back to `control.neutral_target`, then to the initial density.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        mode: ControlMode,
    },
    /// Mix coefficient sets (and optionally controls) and run the result.
    Synthesize {
        #[arg(required = true)]
        theta: Vec<PathBuf>,
        /// Comma-separated weights, equal by default.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        /// Control directories to mix with the same weights.
        #[arg(long)]
        xi: Vec<PathBuf>,
        #[arg(long, default_value = "full")]
        mode: ControlMode,
    },
    /// Downsample and blur a density field.
    Perturb {
        target: PathBuf,
        #[arg(long, default_value_t = 5)]
        kernel: usize,
        #[arg(long, default_value_t = 1.0)]
        std: f64,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Run the state equations for given (or configured uniform) coefficients.
    Forward {
        theta: Option<PathBuf>,
        /// Density to compare against in the error map.
        #[arg(long)]
        target: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
