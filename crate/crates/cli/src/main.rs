//! `csma-eai`: saturated analysis, EAI analysis, simulation, topology
//! generation and the random-network error experiment.

mod commands;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use csma_eai::Error;

#[derive(Parser, Debug)]
#[command(name = "csma-eai", version, about = "Throughput analysis of CSMA networks with finite offered load")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Throughputs with every link saturated.
    Saturated(SaturatedArgs),
    /// Throughputs under finite offered load (compute-and-compare).
    Analyze(AnalyzeArgs),
    /// Event-driven simulation of the network.
    Simulate(SimulateArgs),
    /// Write a random contention graph.
    Gen(GenArgs),
    /// EAI versus simulation on random networks, per mean degree.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Human,
    Json,
}

#[derive(Args, Debug)]
pub struct IntensityArgs {
    /// Uniform access intensity for every link.
    #[arg(long, conflicts_with = "rho_file", required_unless_present = "rho_file")]
    pub rho: Option<f64>,
    /// Per-link access intensities, one per line.
    #[arg(long)]
    pub rho_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SaturatedArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub intensities: IntensityArgs,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub intensities: IntensityArgs,
    /// Per-link offered loads, one per line.
    #[arg(long)]
    pub loads: PathBuf,
    /// Print per-iteration vectors in human output.
    #[arg(long)]
    pub trace: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Saturated,
    Offered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransmissionArg {
    Exponential,
    Uniform,
    Constant,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub intensities: IntensityArgs,
    /// Defaults to `offered` when `--loads` is given, `saturated` otherwise.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub loads: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exponential")]
    pub transmission: TransmissionArg,
    #[arg(long, default_value_t = 1e6)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e5)]
    pub warmup: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub links: usize,
    #[arg(long)]
    pub mean_degree: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 3.0, 4.0])]
    pub degrees: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 20)]
    pub links: usize,
    #[arg(long, default_value_t = csma_eai::RHO_80211B)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e6)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the per-degree summary as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Extra diagnostic printed to standard error after the message.
    pub detail: Option<String>,
    /// Partial report still written to standard output.
    pub output: Option<String>,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into(), detail: None, output: None }
    }
}

/// 2 input parse, 3 state-space cap, 4 solver non-convergence, 5 invalid
/// configuration.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Parse { .. }
        | Error::IndexOutOfRange { .. }
        | Error::SelfLoop(_)
        | Error::NoLinks
        | Error::TooManyLinks(_)
        | Error::LengthMismatch { .. }
        | Error::InvalidIntensity { .. }
        | Error::InvalidLoad { .. } => 2,
        Error::StateSpaceTooLarge { .. } => 3,
        Error::NoConvergence { .. }
        | Error::InfeasibleTarget { .. }
        | Error::IterationLimitExceeded(_)
        | Error::InvalidTargets(_)
        | Error::Overflow(_) => 4,
        Error::InvalidConfig(_) | Error::TooManyEdges { .. } => 5,
        Error::StateOutOfRange { .. } | Error::InvariantViolation(_) => 1,
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure::new(exit_code(&error), error.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Saturated(args) => commands::saturated(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Gen(args) => commands::gen(&args),
        Command::Experiment(args) => experiment::run(&args),
    };
    match result {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            if let Some(output) = failure.output {
                print!("{output}");
            }
            eprintln!("error: {}", failure.message);
            if let Some(detail) = failure.detail {
                eprintln!("{detail}");
            }
            ExitCode::from(failure.code)
        }
    }
}
