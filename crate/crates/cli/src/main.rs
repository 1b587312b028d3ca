//! `xref`: protocol runs, tamper scenarios, capacity tables and Monte Carlo
//! sweeps for the cross-referencing simulator.
//!
//! Exit codes: 0 success, 1 protocol or detection failure, 2 usage or
//! configuration error.

mod capacity;
mod config;
mod montecarlo;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "xref", version, about = "Multi-domain blockchain cross-referencing simulator")]
struct Cli {
    /// Overrides the seed from the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one cross-referencing round and write transcript, summary and snapshot.
    Simulate(SimulateArgs),
    /// Tamper with a block in a snapshot and audit it against the other domains.
    TamperDemo(TamperDemoArgs),
    /// Print the throughput model over a block-interval sweep.
    Capacity(CapacityArgs),
    /// Monte Carlo histograms of R and R' over the (m, alpha, X) grid.
    TamperMc(McArgs),
    /// Monte Carlo histograms of R and R' with stop-failed domains.
    FailureMc(McArgs),
    /// Print one domain's chain from a snapshot as JSON.
    DumpChain(DumpChainArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Configuration file (default: $XREF_CONFIG_DIR/xref.json).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    flowchart: u8,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TamperDemoArgs {
    /// `world.json` written by `simulate`.
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    domain: u32,
    #[arg(long)]
    height: u64,
    /// Leave the chain unrelinked after changing the payload.
    #[arg(long)]
    no_remine: bool,
    /// Also write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CapacityArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `lo:hi:step` in seconds.
    #[arg(long)]
    tau_sweep: Option<String>,
    /// Mean transactions per block.
    #[arg(long)]
    c: Option<f64>,
    /// Block propagation latency in seconds.
    #[arg(long)]
    tau_fork: Option<f64>,
    /// Multiplicative scaling: base tps, block-size ratio, interval ratio, domain count.
    #[arg(long, num_args = 4, value_names = ["BASE_TPS", "SIZE_RATIO", "INTERVAL_RATIO", "M"])]
    scale: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the trial count per configuration.
    #[arg(long)]
    trials: Option<usize>,
    /// Also write every sample as CSV.
    #[arg(long)]
    raw_samples: bool,
}

#[derive(Debug, Args)]
struct DumpChainArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    domain: u32,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or files: exit 2.
    Usage(anyhow::Error),
    /// The run itself failed (protocol aborted, tamper undetected): exit 1.
    Outcome(String),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Usage(e.into())
    }
}

pub type CliResult = Result<(), CliError>;

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate(a) => simulate::simulate(a.config.as_deref(), a.flowchart, &a.out, cli.seed),
        Command::TamperDemo(a) => {
            simulate::tamper_demo(&a.snapshot, a.domain, a.height, !a.no_remine, a.out.as_deref())
        }
        Command::DumpChain(a) => simulate::dump_chain(&a.snapshot, a.domain),
        Command::Capacity(a) => capacity::capacity(&a),
        Command::TamperMc(a) => montecarlo::tamper_mc(&a, cli.seed),
        Command::FailureMc(a) => montecarlo::failure_mc(&a, cli.seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Outcome(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
