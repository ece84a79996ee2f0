mod commands;
mod config;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Posterior of the number of components in finite normal mixtures.
#[derive(Debug, Parser)]
#[command(name = "mixk", version, args_override_self = true)]
pub struct Cli {
    /// Flat `key = value` file of defaults; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Data-free ratio tables and posterior bounds.
    Tables(commands::tables::TablesArgs),
    /// Fixed-k chains and a marginal-likelihood estimator, or the variable-k sampler.
    Fit(commands::fit::FitArgs),
    /// Variable-k sampler with (τ, δ) updates and per-k median summaries.
    Hyper(commands::hyper::HyperArgs),
    /// Compare estimators with exact values on a small instance.
    Oracle(commands::oracle::OracleArgs),
}

/// Output directory handling shared by all subcommands.
#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Run directory. Defaults to `<root>/<command>` with the root taken
    /// from `MIXK_OUTPUT_DIR`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, env = "MIXK_OUTPUT_DIR", default_value = "runs", hide_env_values = true)]
    output_root: PathBuf,
}

impl OutArgs {
    pub fn dir(&self, command: &str) -> anyhow::Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| self.output_root.join(command));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let result = match &cli.command {
        Command::Tables(a) => commands::tables::run(a),
        Command::Fit(a) => commands::fit::run(a),
        Command::Hyper(a) => commands::hyper::run(a),
        Command::Oracle(a) => commands::oracle::run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
