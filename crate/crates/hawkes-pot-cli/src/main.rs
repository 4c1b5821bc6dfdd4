//! Command-line surface for the Bayesian marked Hawkes peaks-over-threshold
//! pipeline.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
//! failure.

mod commands;
mod config;
mod errors;
mod ingest;
mod split;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use errors::Result;

#[derive(Parser)]
#[command(name = "hawkes-pot", version, about = "Bayesian marked Hawkes peaks-over-threshold modelling")]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<String>,
    /// Override the configured root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic replicate of a study truth.
    Simulate,
    /// Fit the configured model variant and persist the draws.
    Fit,
    /// Forward-simulate predictive paths from a fitted store.
    Predict,
    /// Score a fitted store on its held-out test window.
    Score,
    /// Run the full simulation study.
    Study,
    /// Emit plot-ready CSVs from a fitted store.
    Report,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| errors::CliError::usage("missing --config <path>"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Fit => commands::cmd_fit(&cfg),
        Command::Predict => commands::cmd_predict(&cfg),
        Command::Score => commands::cmd_score(&cfg),
        Command::Study => commands::cmd_study(&cfg),
        Command::Report => commands::cmd_report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
