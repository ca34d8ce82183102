use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use percolab_cli::{replay, run, ReplayOptions, RunOptions};

#[derive(Parser)]
#[command(name = "percolab", version, about = "Planar continuum percolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; does not change any output.
        #[arg(long)]
        threads: Option<usize>,
        /// Cross-validate detections against the raster oracle.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute recorded rows and compare their outcomes bit for bit.
    Replay {
        #[arg(long)]
        summary: PathBuf,
        /// Row indices to replay, comma separated; all rows by default.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Run { config, seed, threads, oracle, out } => run(&config, &RunOptions { seed, threads, oracle, out }),
        Command::Replay { summary, rows, seed, threads } => replay(&summary, &ReplayOptions { rows, seed, threads }),
    };
    ExitCode::from(code as u8)
}
