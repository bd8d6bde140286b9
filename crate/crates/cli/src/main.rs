mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

const CONFIG_HELP: &str = "\
Config is one JSON document read from --config <path> (or '-' for stdin).
Every key is optional. Keys and defaults:

  tau            \"pi/2\"   radians or a fraction of pi such as \"pi/3\"
  f_inf          F_tau of coefficients.A (the identity unless set)
  lam1           none     calibrate: fixed first eigenvalue (isotropic if absent)
  grid           {r_min: 2, r_max: 200, n_r: 512, n_theta: 64}
  source         {power: 3, log_power: 0, harmonic: 0, amp: 1}
                 poisson source amp * r^-power * (ln r)^log_power * cos(harmonic*theta)
  rhs            {amp: 0.2, zeta: 2.5}   radial right-hand side f_inf + amp * r^-zeta
  radial         {r0: 1, u0: quadratic, du0: quadratic + slope_shift,
                  slope_shift: 0, r_max: 1e5, n_steps: 20000}
  coefficients   {A: [1, 0, 1], b: [0, 0], c: 0, d: 0, d1: 0, d2: 0}
  window         [r_max/100, r_max] of the data, clipped to the sampled radii
  input          extract: CSV with r,theta,value (field) or r,u,du,ddu (profile)
  output         output path (--out wins)
  samples        manufacture: also write u from the expansion as r,theta,value
  seed           11       verify-suite seed (--seed wins)

Exit codes: 0 success, 1 suite failure, 2 input or domain error.";

#[derive(Parser, Debug)]
#[command(name = "gradgraph", version, about = "Verification runs for F_tau gradient-graph equations", after_help = CONFIG_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config path, or '-' for standard input.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run a single suite check by name.
    #[arg(long, global = true)]
    pub only: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve F_tau(lam1, lam2) = f_inf and print A, P and the attainable range.
    Calibrate,
    /// Solve the exterior Poisson problem for the configured source.
    Poisson,
    /// Integrate the radial equation.
    Radial,
    /// Build the right-hand side of a prescribed far-field expansion.
    Manufacture,
    /// Fit the far-field expansion to sampled data.
    Extract,
    /// Run the verification suite.
    VerifySuite,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("CONFIG: {0}")]
    Config(String),
    #[error("IO: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ftau(#[from] gradgraph::FtauError),
    #[error(transparent)]
    Poisson(#[from] gradgraph::PoissonError),
    #[error(transparent)]
    Radial(#[from] gradgraph::RadialError),
    #[error(transparent)]
    Asymptotics(#[from] gradgraph::AsymptoticsError),
    #[error(transparent)]
    Data(#[from] gradgraph::io::IoError),
    #[error(transparent)]
    Suite(#[from] gradgraph::suite::SuiteError),
    #[error("OUTPUT: {0}")]
    Output(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
