use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "wptmod", version, about = "Two-coil WPT model and metal object detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario TOML file or the name of a bundled scenario.
    #[arg(long, global = true, default_value = "paper-repro")]
    pub scenario: String,
    /// Noise seed (overrides the scenario).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides the scenario).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Degree of the P-I threshold polynomial.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Minimum transmitter current for a decision, A.
    #[arg(long = "gate-amps", global = true)]
    pub gate_amps: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the metal property database.
    Materials {
        /// Material database file instead of the bundled table.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Show a single material.
        #[arg(long)]
        name: Option<String>,
        /// Add or replace a material in --db: NAME:CONDUCTIVITY_S_PER_M:REL_PERMEABILITY.
        #[arg(long, requires = "db")]
        add: Option<String>,
    },
    /// Mutual inductances: coil/coil, coil/plate and the Neumann reference.
    Couplings,
    /// Equivalent eddy resistance and inductance of every plate.
    Impedance {
        /// Truncation limit of the spectral integral, 1/m.
        #[arg(long = "k-max")]
        k_max: Option<f64>,
    },
    /// U-I and P-I characteristic curves of every receiver.
    Curves,
    /// Fit U-I and P-I thresholds from labelled curves.
    Fit {
        /// Training curves CSV (default: <out>/curves.csv, else computed).
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Classify samples against fitted thresholds.
    Detect {
        /// Threshold model JSON (default: <out>/thresholds.json, else fitted).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Labelled samples CSV (default: noisy samples at the scenario test currents).
        #[arg(long)]
        samples: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Materials { db, name, add } => commands::materials(db, name, add),
        Command::Couplings => commands::couplings(&cli.common),
        Command::Impedance { k_max } => commands::impedance(&cli.common, k_max),
        Command::Curves => commands::curves(&cli.common),
        Command::Fit { curves } => commands::fit(&cli.common, curves),
        Command::Detect { model, samples } => commands::detect(&cli.common, model, samples),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
