//! `stahqc`: runs gate simulations and writes CSV/JSON artifacts.

mod commands;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "stahqc",
    version,
    about = "Shortcut-to-adiabaticity holonomic qutrit gate simulator"
)]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Named gate: I, Z, X, H or Xhalf.
    #[arg(long, global = true)]
    pub gate: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Control scheme: sta, nhqc or sta-optimized.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Gate duration in seconds.
    #[arg(long, global = true)]
    pub duration: Option<f64>,
    /// Ωₐ/2π in Hz.
    #[arg(long, global = true)]
    pub omega_a_hz: Option<f64>,
    #[arg(long, global = true)]
    pub n_steps: Option<usize>,
    /// Switch off decoherence.
    #[arg(long, global = true)]
    pub no_noise: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one gate: trajectory.csv and gate.json.
    SimulateGate {
        /// Record every k-th step of the trajectory.
        #[arg(long)]
        every: Option<usize>,
        /// Relative amplitude error applied to the drive.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
    },
    /// Process tomography of the simulated gate: chi.json.
    Tomography {
        /// Prepare inputs with simulated pulses instead of exactly.
        #[arg(long)]
        gate_prep: bool,
    },
    /// Fidelity against amplitude error for each scheme: sweep.csv.
    SweepError {
        /// Comma-separated schemes to compare.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        /// Comma-separated relative amplitude errors.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alphas: Option<Vec<f64>>,
    },
    /// Shape the mixing angle for robustness: optimization.jsonl and schedule.json.
    Optimize {
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        family_dim: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alphas: Option<Vec<f64>>,
    },
    /// Write the two-tone waveform: pulses.csv.
    ExportPulses {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Geometric and dynamical phase of the bright state: phases.json.
    Phases,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
