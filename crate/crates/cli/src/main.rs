use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "qmac", version, about = "Simulate and analyze the queue-based distributed MAC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation; writes trace.csv and summary.json.
    Simulate(CommonArgs),
    /// Exact fixed-weight chain analysis; writes chain_report.json.
    AnalyzeChain(CommonArgs),
    /// Capacity-region margin of the configured rates; writes capacity.json.
    Capacity(CommonArgs),
    /// Run several schedulers on common arrivals; writes compare.json and compare.csv.
    Compare(CommonArgs),
    /// Monte-Carlo drift of the potential from the configured start; writes drift.json.
    Drift(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config horizon.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Suppress stdout output.
    #[arg(long)]
    pub quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::AnalyzeChain(a) => commands::analyze_chain(a),
        Command::Capacity(a) => commands::capacity(a),
        Command::Compare(a) => commands::compare(a),
        Command::Drift(a) => commands::drift(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Capability(_) => 3,
            CliError::CheckFailed(_) => 4,
            CliError::Runtime(_) => 1,
        }
    }
}
