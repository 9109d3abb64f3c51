//! Argument parsing and dispatch for the `rerum` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{cmd_curves, cmd_eval, cmd_synth, cmd_train, summary_line};
use crate::config::{extract_overrides, RunConfig};
use crate::error::{Error, Result};

/// Revenue uplift modeling: train, evaluate and export uplift curves.
///
/// Any configuration field can be overridden with a dotted flag, for
/// example `--train.batch_size 128` or `--eval.lift_h 2`.
#[derive(Debug, Parser)]
#[command(name = "rerum", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Training seed; also seeds the split and synthetic draw unless set separately.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Replace existing output files.
    #[arg(long, global = true)]
    pub overwrite: bool,

    /// Input CSV (same as `--data.csv`).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,

    /// Checkpoint for `eval` and `curves` (same as `--eval.checkpoint`).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Split, train and write the best checkpoint with its history.
    Train,
    /// Score a split with a checkpoint and write metrics and curves.
    Eval,
    /// Write a synthetic dataset with its true effects.
    Synth,
    /// Write uplift and Qini curves for a split.
    Curves,
}

/// A parsed command line with its fully resolved configuration.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: RunConfig,
}

/// Parse `args` (program name first). Dotted overrides are applied after
/// the config file; the named flags win over both.
pub fn parse(args: Vec<String>) -> Result<std::result::Result<Invocation, clap::Error>> {
    let (rest, overrides) = extract_overrides(args)?;
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) => return Ok(Err(e)),
    };
    let mut config = RunConfig::resolve(cli.config.as_deref(), &overrides)?;
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    if cli.overwrite {
        config.output.overwrite = true;
    }
    if let Some(data) = cli.data {
        config.data.csv = Some(data);
    }
    if let Some(checkpoint) = cli.checkpoint {
        config.eval.checkpoint = Some(checkpoint);
    }
    Ok(Ok(Invocation { command: cli.command, config }))
}

/// Run one command and return its one-line summary.
pub fn execute(invocation: &Invocation) -> Result<String> {
    let config = &invocation.config;
    let echo = serde_json::to_string_pretty(config).map_err(|e| Error::Config(e.to_string()))?;
    log::debug!("resolved configuration:\n{echo}");
    match invocation.command {
        Command::Train => Ok(cmd_train(config)?.summary()),
        Command::Eval => Ok(summary_line(&cmd_eval(config)?)),
        Command::Synth => {
            let n = cmd_synth(config)?;
            Ok(format!("wrote {n} records to {}", config.output.dir.display()))
        }
        Command::Curves => {
            let evaluation = cmd_curves(config)?;
            Ok(format!("wrote {} curve points to {}", evaluation.uplift_curve.points.len(), config.output.dir.display()))
        }
    }
}
