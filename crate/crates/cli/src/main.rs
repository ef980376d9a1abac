//! `ahd`: command-line frontend for the ancilla-assisted homodyne receiver.
//!
//! Exit codes: 0 success, 1 property failure, 2 configuration error,
//! 3 numerical guard (truncation leakage or quadrature grid).

mod commands;
mod config;
mod output;
mod plot;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("property failure: {0}")]
    Property(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn from_core(e: ancilla_homodyne::Error) -> Self {
        if e.is_numerical_guard() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Property(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ahd", version, about = "Ancilla-assisted homodyne BPSK receiver laboratory")]
struct Cli {
    /// Worker threads for trials and grid points; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Fock,
    Homodyne,
    Separability,
    Factorization,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    X0Histogram,
    BerVsAlpha,
    ScanHeatmap,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo BER estimate for a receiver configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Writes one CSV row per trajectory.
        #[arg(long)]
        dump_trajectories: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the invariant suites with fixed seeds.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        cutoff: usize,
        /// Signal amplitude used by the probes.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deterministic BER of a single constant ancilla step.
    ExactN1 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BER over a grid of general U(2) couplings and detection phases.
    ScanU2 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabular data for plotting.
    Plotdata {
        #[arg(value_enum)]
        kind: PlotKind,
        /// Trajectory dump (x0-histogram), config (ber-vs-alpha) or scan
        /// report (scan-heatmap).
        #[arg(long)]
        source: PathBuf,
        /// Config supplying α and the priors for the x0-histogram reference.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Overrides the configured `alphas` list.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { config, seed, dump_trajectories, out } => {
            commands::simulate(&config, seed, dump_trajectories.as_deref(), out.as_deref())
        }
        Command::Verify { suite, seed, cutoff, alpha, out } => verify::run(suite, seed, cutoff, alpha, out.as_deref()),
        Command::ExactN1 { config, out } => commands::exact_n1(&config, out.as_deref()),
        Command::ScanU2 { config, out } => commands::scan_u2(&config, out.as_deref()),
        Command::Plotdata { kind, source, config, bins, alphas, seed, out } => {
            plot::run(kind, &source, config.as_deref(), bins, alphas, seed, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.workers {
        Some(0) => Err(CliError::Config("invalid `--workers`: must be >= 1".into())),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(CliError::Io(format!("cannot start worker pool: {e}"))),
        },
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ahd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
