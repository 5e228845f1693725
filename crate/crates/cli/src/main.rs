//! `deltadual`: backward and forward delta-space experiments from the command line.

mod config;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deltadual::experiment::ExperimentKind;
use deltadual::forward::Propagator;

use config::PartialConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0} validation check(s) failed")]
    Validation(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) | CliError::Diverged(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "deltadual", version, about = "Option pricing in spot and delta space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the backward pricing equation.
    Backward(Flags),
    /// Forward dual equation with the delta volatility from the backward gammas.
    ForwardLinear(Flags),
    /// Forward nonlinear equation for the conjugate price.
    ForwardNonlinear(Flags),
    /// Run the acceptance checks.
    Validate {
        /// Directory for validation.toml.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// TOML run configuration (a previous manifest.toml works too).
    #[arg(long)]
    config: Option<PathBuf>,
    /// table1 or displaced.
    #[arg(long)]
    experiment: Option<ExperimentKind>,
    /// Local volatility table, CSV in spot units.
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long)]
    n_space: Option<usize>,
    #[arg(long)]
    n_time: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    smoothing: Option<bool>,
    /// pade or expm.
    #[arg(long)]
    propagator: Option<Propagator>,
    /// Record stability reports every N Picard iterations (default 1).
    #[arg(long, num_args = 0..=1, default_missing_value = "1")]
    diagnostics: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self) -> Result<config::RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => PartialConfig::load(p)?,
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            experiment: self.experiment,
            surface: self.surface,
            n_space: self.n_space,
            n_time: self.n_time,
            tolerance: self.tolerance,
            smoothing: self.smoothing,
            propagator: self.propagator,
            diagnostics: self.diagnostics,
            out: self.out,
            ..Default::default()
        };
        file.merge(flags).resolve()
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Backward(f) => run::backward(&f.resolve()?),
        Command::ForwardLinear(f) => run::forward_linear(&f.resolve()?),
        Command::ForwardNonlinear(f) => run::forward_nonlinear(&f.resolve()?),
        Command::Validate { out } => run::validate(&out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("deltadual: {e}");
            ExitCode::from(e.code())
        }
    }
}
