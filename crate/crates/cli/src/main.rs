mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Mesh-based global forecasting pipeline: geometry, synthetic data,
/// training, forecasting and verification.
#[derive(Debug, Parser)]
#[command(name = "meshcast", version)]
pub struct Cli {
    /// Cap on worker threads (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print multi-mesh statistics per refinement level and check them against the reference table
    MeshStats {
        /// Finest refinement level
        #[arg(long, default_value_t = 6)]
        refinement: usize,
        /// Also write the table as CSV to this file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build the multi-mesh and both grid/mesh edge sets and write them as a container
    BuildEdges {
        /// Grid resolution in degrees
        #[arg(long)]
        grid: f64,
        /// Finest refinement level
        #[arg(long, default_value_t = 6)]
        refinement: usize,
        /// Output container directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset container
    GenData {
        /// Grid resolution in degrees
        #[arg(long, default_value_t = 5.0)]
        grid: f64,
        /// Number of pressure levels of the atmospheric channel
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Number of 6-hour time steps
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// First time stamp (ISO-8601 UTC)
        #[arg(long, default_value = "2016-01-01T00:00:00Z")]
        start: String,
        /// Output container directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model with the three-phase curriculum
    Train {
        /// JSON run configuration; flags override its fields
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset container
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory for the metrics log and checkpoints
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Factor applied to every phase length
        #[arg(long)]
        schedule_scale: Option<f64>,
        /// Mesh refinement level
        #[arg(long)]
        refinement: Option<usize>,
        /// Latent width
        #[arg(long)]
        latent: Option<usize>,
        /// Processor depth
        #[arg(long)]
        processor_layers: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Roll a checkpoint forward from dataset initial conditions
    Forecast {
        /// Checkpoint container
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset container providing initial states and forcings
        #[arg(long)]
        data: PathBuf,
        /// Number of autoregressive steps
        #[arg(long)]
        steps: usize,
        /// Initialization time (ISO-8601 UTC)
        #[arg(long, conflicts_with = "inits_in")]
        init: Option<String>,
        /// Forecast from every 00z/12z init in YEAR[:YEAR], one container per init
        #[arg(long, value_name = "YEARS")]
        inits_in: Option<String>,
        /// Output container (or directory of containers)
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a day-of-year climatology over a reference period
    Climatology {
        /// Dataset container
        #[arg(long)]
        data: PathBuf,
        /// Reference period YEAR[:YEAR]
        #[arg(long)]
        years: String,
        /// Output container directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute RMSE and ACC of forecasts against a dataset
    Evaluate {
        /// Forecast container or directory of forecast containers
        #[arg(long)]
        forecasts: PathBuf,
        /// Dataset container holding the verifying states
        #[arg(long)]
        truth: PathBuf,
        /// Climatology container; ACC is skipped without it
        #[arg(long)]
        clim: Option<PathBuf>,
        /// Restrict to LAT_MIN,LAT_MAX,LON_MIN,LON_MAX
        #[arg(long, value_name = "BOX")]
        region: Option<String>,
        /// Split label recorded in the report
        #[arg(long, default_value = "test")]
        label: String,
        /// Report CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Skill scores of report A against baseline B, with plot data and summaries
    Scorecard {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Scorecard CSV path; plot data and summaries are written beside it
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("validation error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
