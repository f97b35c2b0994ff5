mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::parse_seed_list;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "acal", version, about = "Annotator-centric active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration over one or more seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds, each `n` or `split:model:strategy`. Overrides the config.
        #[arg(long)]
        seeds: Option<String>,
        /// Worker threads for independent seeds (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Generate a synthetic annotator population.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare finished runs in one table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write the CSV table here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            jobs,
        } => {
            let seeds = seeds.as_deref().map(parse_seed_list).transpose()?;
            if jobs == Some(0) {
                return Err(CliError::Validation("--jobs must be at least 1".into()));
            }
            commands::run(&config, &out, seeds, jobs)
        }
        Command::Synth { config, out } => commands::synth(&config, &out),
        Command::Report { runs, out } => commands::report(&runs, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("acal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
