//! `symreg`: fit symmetric and log-symmetric regressions, test coefficient
//! blocks, and run the Monte Carlo studies.

mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symreg_core::distribution::Family;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{0}")]
    Core(#[from] symreg_core::Error),
    /// The report was written but the fit stopped early.
    #[error("fit did not converge ({0})")]
    Unconverged(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use symreg_core::Error as E;
        match self {
            CliError::Unconverged(_) => 1,
            CliError::Core(E::NonConvergence { .. } | E::NotConverged(_) | E::TooManyFailures { .. } | E::Quadrature { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "symreg", version, about = "Symmetric and log-symmetric linear regression with corrected tests")]
struct Cli {
    /// Worker threads for bootstrap and simulations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximum likelihood fit with standard errors and AICc.
    Fit(FitArgs),
    /// Wald, likelihood ratio, score and gradient tests plus corrections.
    Test(TestArgs),
    /// Null rejection rates of every test.
    SimulateSize(SimArgs),
    /// Size-corrected power over a grid of shifts.
    SimulatePower(SimArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column.
    #[arg(long)]
    pub response: String,
    /// normal, cauchy, student-t:NU, logistic1, logistic2 or pexp:K.
    #[arg(long, default_value = "normal", value_parser = parse_family)]
    pub family: Family,
    /// Fit log(response): the log-symmetric model for a positive response.
    #[arg(long)]
    pub log: bool,
    /// Covariate columns (default: every column except the response).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Leave out the intercept column.
    #[arg(long)]
    pub no_intercept: bool,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Columns whose coefficients are tested.
    #[arg(long = "test", value_delimiter = ',', required = true)]
    pub tested: Vec<String>,
    /// Null values for the tested coefficients (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub null: Option<Vec<f64>>,
    /// Level used for the reject flags.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Parametric bootstrap replicates.
    #[arg(long)]
    pub boot: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report statistics even if a fit did not converge.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Design file (TOML, or a JSON manifest from an earlier run).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Noise seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap replicates per Monte Carlo replicate; 0 disables.
    #[arg(long)]
    pub boot: Option<usize>,
    /// Nominal levels, e.g. 0.1,0.05,0.01.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Null replicates used for size-corrected critical values.
    #[arg(long)]
    pub calibration_reps: Option<usize>,
    /// Output directory for tables, JSON results and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Test(a) => commands::test(a),
        Command::SimulateSize(a) => commands::simulate(a, commands::Study::Size, cli.threads),
        Command::SimulatePower(a) => commands::simulate(a, commands::Study::Power, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
