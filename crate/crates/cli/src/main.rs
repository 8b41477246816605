//! `slant` — pipeline orchestrator.
//!
//! Subcommands run the stages end to end from one JSON config: simulate
//! (synthetic data), prepare (segmentation), train (classifier), score
//! (slant measures), topics (LDA), regress (panel estimation), and report
//! (plot-ready data). Exit codes: 0 success, 2 validation error, 1 runtime
//! error.

mod commands;
mod config;
mod errors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::errors::{exit_code, invalid};

#[derive(Parser)]
#[command(name = "slant", version, about = "Media slant measurement and estimation pipeline")]
struct Cli {
    /// Pipeline configuration file (JSON).
    #[arg(long, global = true, default_value = "slant.json")]
    config: PathBuf,

    /// Override the config's output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Override the config's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment corpora into snippets and balance the labeled sample.
    Prepare,
    /// Select features, tune the penalty, and fit the source classifier.
    Train,
    /// Score article snippets and aggregate outlet/county slant.
    Score,
    /// Train the LDA topic model and attach locality labels.
    Topics,
    /// Estimate the configured regression specs on the panel.
    Regress,
    /// Generate a synthetic dataset with known ground truth.
    Simulate,
    /// Emit calibration, confusion, distinctive-bigram, and binscatter data.
    Report,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (mut config, config_bytes) = PipelineConfig::load(&cli.config).map_err(|e| {
        // Config problems are user input problems.
        invalid(format!("{e:#}"))
    })?;
    if let Some(out_dir) = cli.out_dir {
        config.out_dir = out_dir;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Prepare => commands::prepare(&config, &config_bytes),
        Command::Train => commands::train(&config, &config_bytes),
        Command::Score => commands::score(&config, &config_bytes),
        Command::Topics => commands::cmd_topics(&config, &config_bytes),
        Command::Regress => commands::regress(&config, &config_bytes),
        Command::Simulate => commands::simulate(&config, &config_bytes),
        Command::Report => commands::report(&config, &config_bytes),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
