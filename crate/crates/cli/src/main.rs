//! Command-line front end for the clustering pipeline.
//!
//! Five subcommands cover the full workflow: `prep` standardizes and prunes
//! a raw table, `cluster` fits the trimmed subspace model, `select` searches
//! the cluster-count grid, `regress` runs the inference battery, and `synth`
//! generates benchmark data with ground truth.
//!
//! Every option can come from a flag or from the matching key in a TOML
//! config file (section per subcommand); flags win. Exit codes: 0 success,
//! 1 runtime failure, 2 validation failure.

mod commands;
mod config;
mod emit;

use clap::{Parser, Subcommand};
use std::process::ExitCode;
use tfkm::Error;

#[derive(Parser)]
#[command(
    name = "tfkm",
    version,
    about = "Trimmed subspace clustering: preparation, fitting, model selection, regression, synthetic benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standardize a raw feature table and prune near-duplicate variables
    Prep(commands::prep::PrepArgs),
    /// Fit the clustering model and write solution reports
    Cluster(commands::cluster::ClusterArgs),
    /// Search the cluster-count grid and write selection curves
    Select(commands::select::SelectArgs),
    /// Run the regression battery from a column-role manifest
    Regress(commands::regress::RegressArgs),
    /// Generate a synthetic dataset with ground truth
    Synth(commands::synth::SynthArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Prep(args) => commands::prep::run(args),
        Command::Cluster(args) => commands::cluster::run(args),
        Command::Select(args) => commands::select::run(args),
        Command::Regress(args) => commands::regress::run(args),
        Command::Synth(args) => commands::synth::run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

// Configuration and input-shape problems are the caller's to fix (2);
// everything that surfaces mid-computation is a runtime failure (1).
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Data(_) | Error::Shape(_) => 2,
        _ => 1,
    }
}
