use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "sfwm", version, about = "Multimode birefringent-fiber SFWM modelling and fiber characterization")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Guided LP modes, effective indices, cutoffs and mode-field diameter
    Modes(commands::ModesArgs),
    /// Enumerate processes and apply the OAM/parity selection rules
    Enumerate(commands::EnumerateArgs),
    /// Phase-matching curves versus pump wavelength
    Phasematch(commands::PhasematchArgs),
    /// Joint spectral intensity of the multi-process two-photon state
    Jsi(commands::JsiArgs),
    /// Fit fiber parameters and process assignments to peak data
    Fit(commands::FitArgs),
    /// Generate synthetic peak observations from a known fiber
    SimulatePeaks(commands::SimulateArgs),
    /// Classify (r0, NA) cells as phase-matched, mismatched or unsupported
    Feasibility(commands::FeasibilityArgs),
}

/// Failure class, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or input (exit 2).
    Config(String),
    /// Computation failed (exit 1).
    Compute(String),
}

impl From<sfwm_core::Error> for Failure {
    fn from(e: sfwm_core::Error) -> Self {
        use sfwm_core::Error::*;
        match e {
            InvalidFiber { .. } | Parse(_) | InvalidArgument(_) | InvalidMode(_) | WavelengthOutOfRange { .. } => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Compute(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = RunConfig::resolve(&cli.overrides)?;
    let doc = match &cli.command {
        Command::Modes(a) => commands::modes(&config, a)?,
        Command::Enumerate(a) => commands::enumerate(&config, a)?,
        Command::Phasematch(a) => commands::phasematch(&config, a)?,
        Command::Jsi(a) => commands::jsi(&config, a)?,
        Command::Fit(a) => commands::fit(&config, a)?,
        Command::SimulatePeaks(a) => commands::simulate_peaks(&config, a)?,
        Command::Feasibility(a) => commands::feasibility(&config, a)?,
    };
    doc.emit(&config)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
