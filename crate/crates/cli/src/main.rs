//! `ldsforge`: build, analyze and simulate low-density signatures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "ldsforge",
    version,
    about = "Power-imbalanced LDS from Eisenstein-integer rings"
)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "LDSFORGE_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Signature matrix or external codebooks to operate on.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// LDS matrix JSON file.
    #[arg(long)]
    lds: Option<PathBuf>,
    /// External full-codebook JSON file.
    #[arg(long)]
    codebooks: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    /// Output file (standard output when omitted, where allowed).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List Eisenstein-integer rings up to a squared radius.
    Rings {
        #[arg(long)]
        max_radius_sq: u64,
    },
    /// Write a built-in LDS matrix (s1 or s2).
    Builtin {
        name: String,
        #[command(flatten)]
        output: Output,
    },
    /// Search for a power-imbalanced LDS over the given rings.
    Construct {
        /// `paper` for the built-in 4×6 graph, or a graph JSON file.
        #[arg(long, default_value = "paper")]
        graph: String,
        /// Squared ring radii, one per active user of a resource, ascending.
        #[arg(long, value_delimiter = ',', default_value = "1,3,7")]
        rings_sq: Vec<u64>,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "qpsk")]
        constellation: String,
        /// Refinement rounds after the random phase.
        #[arg(long, default_value_t = 0)]
        refine_rounds: u32,
        #[arg(long, default_value_t = ldsforge_core::metrics::DEFAULT_CAP)]
        cap: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Report MPDS, diversity, kissing number and energies.
    Analyze {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "qpsk")]
        constellation: String,
        /// Coordinates closer than this count as equal.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = ldsforge_core::metrics::DEFAULT_CAP)]
        cap: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Average-BER union bound over an Eb/N0 grid.
    Bound {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "qpsk")]
        constellation: String,
        /// Grid `start:stop:step` in dB, or a single value.
        #[arg(long)]
        ebno: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = ldsforge_core::metrics::DEFAULT_CAP)]
        cap: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo BER with message-passing detection.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "qpsk")]
        constellation: String,
        #[arg(long, default_value = "awgn")]
        channel: String,
        #[arg(long)]
        ebno: String,
        #[arg(long, default_value_t = 8)]
        iters: usize,
        /// Use max-log combining in the detector.
        #[arg(long)]
        max_log: bool,
        #[arg(long, default_value_t = 200)]
        min_errors: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_blocks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Detect a single received vector (debugging aid).
    Detect {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "qpsk")]
        constellation: String,
        /// JSON file `{"y":[[re,im],...],"h":[[re,im],...],"n0":...}`.
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 8)]
        iters: usize,
        #[arg(long)]
        max_log: bool,
        #[arg(long, default_value_t = ldsforge_core::metrics::DEFAULT_CAP)]
        cap: u64,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
