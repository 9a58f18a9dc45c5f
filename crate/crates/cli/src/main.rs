mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmt_core::lp::LpMode;

use crate::report::RunReport;

#[derive(Parser, Debug)]
#[command(
    name = "qmt",
    version,
    about = "Quantal measure toolkit: build, audit and bound decoherence functionals"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Override the tolerance of the tolerance-based checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomized builds and suites (ChaCha8).
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Include wall-clock timings (reports are then no longer reproducible byte for byte).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a joint decoherence functional from a quantum model.
    Build(BuildArgs),
    /// Marginals, experimental probabilities, correlators and CHSH values.
    Epr { file: PathBuf },
    /// Hilbert space of a strongly positive functional.
    Gns { file: PathBuf },
    /// Screening-off checks and constructions.
    #[command(subcommand)]
    Screening(ScreeningCommand),
    /// Weak-positivity linear program.
    #[command(subcommand)]
    Lp(LpCommand),
    /// Axiom, positivity, marginal, bound and non-signalling audit of a matrix file.
    Check { file: PathBuf },
    /// Run a named pipeline end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Builder {
    /// Symmetrized (anticommutator) class operators.
    Sym,
    /// Primed projector applied first on each side.
    Ordered,
    /// Convex combination of the two orderings.
    Convex,
    /// Commuting projector families from a density matrix.
    Commuting,
    /// The closed form for the singlet.
    ClosedForm,
    /// A random density matrix with random directions.
    Random,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(value_enum)]
    pub kind: Builder,
    /// State file: {"state": [...]} or {"density": [[...]]}; default the singlet.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Directions file; default the standard CHSH directions.
    #[arg(long)]
    pub directions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub lambda_a: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda_b: f64,
    /// Write the functional itself to this file.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum ScreeningCommand {
    /// Check a structured model for screening off.
    Check {
        file: PathBuf,
        /// Skip the conditions that need setting probabilities.
        #[arg(long)]
        minimalist: bool,
    },
    /// Joint measure on the 16 joint outcomes from a screening-off model.
    Joint {
        file: PathBuf,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Past-augmented model from a joint measure or functional.
    Augment {
        file: PathBuf,
        /// Probability of setting a (the rest goes to a′).
        #[arg(long, default_value_t = 0.5)]
        p_a: f64,
        /// Probability of setting b.
        #[arg(long, default_value_t = 0.5)]
        p_b: f64,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum LpCommand {
    /// Maximize Q over weakly positive joint functionals.
    MaxQ(MaxQArgs),
}

#[derive(Args, Debug)]
pub struct MaxQArgs {
    /// Sign pattern, e.g. +-++ or ab-.
    #[arg(long, default_value = "+-++")]
    pub pattern: String,
    #[arg(long, default_value = "real")]
    pub mode: LpMode,
    #[arg(long, default_value_t = 64)]
    pub cuts_per_round: usize,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Also cut along negative eigenvectors (strong-positivity diagnostic).
    #[arg(long)]
    pub eigen_cuts: bool,
    /// Include the full audit of the optimal candidate.
    #[arg(long)]
    pub audit: bool,
    /// Write the optimal candidate to this file.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    SymSpectrum,
    TsirelsonSaturation,
    Section5,
    LpMax,
    ScreeningRoundtrip,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,
    /// For lp-max: one pattern, or every pattern when omitted.
    #[arg(long)]
    pub pattern: Option<String>,
    #[arg(long, default_value = "real")]
    pub mode: LpMode,
}

/// Input problems: unreadable or malformed files and invalid arguments.
#[derive(Debug)]
pub struct InputError(pub String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn emit(report: &RunReport, g: &Global) -> std::io::Result<()> {
    if let Some(path) = &g.out {
        std::fs::write(path, report.to_json() + "\n")?;
    }
    if g.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::iter::once("qmt".to_string())
        .chain(std::env::args().skip(1))
        .collect();
    match commands::run(&cli, argv) {
        Ok(report) => {
            if let Err(e) = emit(&report, &cli.global) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            match report.first_failure() {
                None => ExitCode::SUCCESS,
                Some(c) => {
                    eprintln!("check failed: {}", c.name);
                    ExitCode::from(1)
                }
            }
        }
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
