//! `coretune`: config-driven coreset runs.
//!
//! Exit codes: 0 success, 1 usage or config error (including a missing
//! upstream artifact), 2 runtime failure, 3 grid finished with failed cells.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Status;
use crate::config::Overrides;

/// An error the user fixes by changing the command line, the config or the
/// order of commands.
#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(message: impl Into<String>) -> Self {
        UsageError(message.into())
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "coretune",
    version,
    about = "Build, tune and refine sensitivity-sampled coresets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Replaces `seed` and, when a grid is configured, `grid.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for tuning; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Sets a config field by dotted path; the value is read as JSON, or as
    /// a plain string when it is not JSON. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split the dataset into train, validation and test files.
    Split(Common),
    /// Compute sensitivity scores on the training split.
    Score(Common),
    /// Sample one coreset with the `sampler` settings.
    Build(Common),
    /// Run the grid search.
    Tune(Common),
    /// Refine the best tuned coreset by uncertainty sampling.
    Refine(Common),
    /// Write comparison tables and F1-by-size curves.
    Report(Common),
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let (common, action): (&Common, fn(&config::Loaded) -> anyhow::Result<Status>) = match &cli.command {
        Command::Split(c) => (c, commands::split),
        Command::Score(c) => (c, commands::score),
        Command::Build(c) => (c, commands::build),
        Command::Tune(c) => (c, commands::tune),
        Command::Refine(c) => (c, commands::refine),
        Command::Report(c) => (c, commands::report),
    };
    let overrides = Overrides {
        seed: common.seed,
        workers: common.workers,
        assignments: common.overrides.clone(),
    };
    let loaded = config::load(&common.config, &overrides)?;
    log::debug!("config hash {}", loaded.hash());
    action(&loaded)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::PartialGrid) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
