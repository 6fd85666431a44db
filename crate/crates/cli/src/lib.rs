//! Config-driven front end for the gcalc-core numerics.
//!
//! [`run`] is the whole `gcalc` command line minus thread-pool setup; it
//! returns the process exit code: 0 pass, 2 falsified (verify only), 1 any error.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Outcome;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "gcalc", version, about = "Sublinear-expectation experiments driven by JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the G-heat equation for a terminal condition.
    Gheat(Common),
    /// Simulate scenarios and estimate an upper expectation.
    Simulate(Common),
    /// Check a (V, f, g) triple against the PDE system and pathwise.
    Verify(Common),
    /// Build the harmonic-function example and a ready-to-run verify config.
    Example(Common),
}

type Handler = fn(&ExperimentConfig, &std::path::Path) -> Result<Outcome>;

fn dispatch(cli: Cli) -> Result<Outcome> {
    let (common, cmd): (&Common, Handler) = match &cli.command {
        Command::Gheat(c) => (c, commands::gheat),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Verify(c) => (c, commands::verify),
        Command::Example(c) => (c, commands::example),
    };
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().or_else(|| cfg.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    cmd(&cfg, &out)
}

/// Parses `args` (program name first) and runs the selected subcommand.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Falsified) => {
            eprintln!("falsified: see verify.json");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
