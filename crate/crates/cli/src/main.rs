//! `freqbin`: batch front-end wiring JSON configs to the simulation and
//! analysis pipeline, emitting plot-ready CSV/JSON.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freqbin_core::{Error as CoreError, RunConfig};

/// Exit codes: 0 ok, 2 usage, 3 data, 4 capacity, 5 numerical.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Capacity(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Capacity(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::Capacity(m)
            | CliError::Numerical(m)
            | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) => CliError::Usage(e.to_string()),
            CoreError::Capacity { .. } => CliError::Capacity(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "freqbin",
    about = "Frequency-bin photonic quantum information simulator",
    version
)]
struct Cli {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master RNG seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for result files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the mask step height and record gate fidelities and success
    /// probability (CSV: alpha_rad, f_identity, f_hadamard, p_success).
    CharacterizeGate {
        /// Number of evenly spaced steps over [0, pi].
        #[arg(long, default_value_t = 32)]
        alpha_steps: usize,
        /// Explicit comma-separated step heights in radians (overrides
        /// --alpha-steps).
        #[arg(long)]
        alphas: Option<String>,
    },
    /// Simulate the joint-spectral-intensity diagonal
    /// (CSV: n, expected_rate, sampled_counts).
    SimulateJsi {
        /// Integration time for the sampled counts, seconds.
        #[arg(long, default_value_t = 1.0)]
        tau_s: f64,
    },
    /// Reconstruct a two-qubit density matrix from 16-projection counts.
    Tomography {
        /// Counts file (.json coincidence record or .csv with
        /// i_label,s_label,counts).
        #[arg(long, conflicts_with_all = ["simulate", "simulate_all"])]
        input: Option<PathBuf>,
        /// Simulate the record for the qubit block at this base index.
        #[arg(long)]
        simulate: Option<u32>,
        /// Simulate and reconstruct every pair of the configured layout.
        #[arg(long, conflicts_with = "simulate")]
        simulate_all: bool,
        /// Monte-Carlo resamples for the error bar.
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        /// Count normalization: shared-flux or per-basis-efficiency.
        #[arg(long, default_value = "per-basis-efficiency")]
        normalization: String,
        /// Integration time for CSV inputs lacking one, seconds.
        #[arg(long)]
        tau_s: Option<f64>,
    },
    /// Compute per-pair QKD metrics
    /// (CSV out: n, raw_rate, qber, sifted_bps, secure).
    Qkd {
        /// Basis-counts CSV
        /// (n, c00, c01, c10, c11, cpp, cpm, cmp, cmm, tau_s).
        #[arg(long, conflicts_with = "simulate")]
        input: Option<PathBuf>,
        /// Simulate the configured multi-pair dataset instead.
        #[arg(long)]
        simulate: bool,
        /// QBER security threshold override.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Allocate secure pairs to a fully connected network of N users.
    PlanNetwork {
        #[arg(long)]
        users: usize,
        /// Metrics CSV produced by the qkd subcommand.
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            RunConfig::from_json(&text).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(cli: &Cli, config: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: &Cli) -> CliResult<()> {
    let config = load_config(cli)?;
    let dir = out_dir(cli, &config);
    std::fs::create_dir_all(&dir)?;
    match &cli.command {
        Command::CharacterizeGate {
            alpha_steps,
            alphas,
        } => commands::characterize_gate(&config, &dir, *alpha_steps, alphas.as_deref()),
        Command::SimulateJsi { tau_s } => commands::simulate_jsi(&config, &dir, *tau_s),
        Command::Tomography {
            input,
            simulate,
            simulate_all,
            resamples,
            normalization,
            tau_s,
        } => commands::tomography(
            &config,
            &dir,
            input.as_deref(),
            *simulate,
            *simulate_all,
            *resamples,
            normalization,
            *tau_s,
        ),
        Command::Qkd {
            input,
            simulate,
            threshold,
        } => commands::qkd(&config, &dir, input.as_deref(), *simulate, *threshold),
        Command::PlanNetwork { users, input } => {
            commands::plan_network(&config, &dir, *users, input)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
