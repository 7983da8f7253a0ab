//! Argument parsing and dispatch for the `lldlab` binary.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lldlab::LabError;
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "lldlab", version, about = "Numerical checks for meromorphic functions with left-located divisor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Absolute/relative tolerance handed to the numerical routines.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Frequency cutoff for atom enumeration.
    #[arg(long = "T", default_value_t = 50.0)]
    pub t_cut: f64,
    /// Vertical line abscissa; repeat for several lines.
    #[arg(long = "c")]
    pub c: Vec<f64>,
    #[arg(long, default_value_t = 6)]
    pub mmax: u32,
    /// Integration range on vertical lines.
    #[arg(long, default_value_t = 65536.0)]
    pub tmax: f64,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    pub out: OutFormat,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence exponent, vertical order, discrepancy and type.
    Analyze(InputArgs),
    /// Coefficients b_k of -log f for a Dirichlet series.
    Bk(InputArgs),
    /// Atoms of the inverse Laplace transform of f'/f for a Dirichlet series.
    Atoms(InputArgs),
    /// Poisson-Newton residual over growing truncations.
    VerifyPn(InputArgs),
    /// Vertical order from L1 norms on vertical lines.
    M0(InputArgs),
    /// Recover the discrepancy polynomial.
    Discrepancy(InputArgs),
    /// Growth of the log-derivative for the divisor with zeros i n^2 2^n.
    Sharpness(SharpArgs),
    /// Digamma through Binet's integral and its bounds.
    GammaCheck(GammaArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Path to a JSON file, `-` for stdin, or inline JSON.
    pub input: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SharpArgs {
    #[arg(long, default_value_t = 10)]
    pub k: u32,
    #[arg(long = "eps", default_value_t = 0.1)]
    pub eps: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct GammaArgs {
    /// Number of random points for the bound checks.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

/// Everything the process writes, plus its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

/// Failure of a command, mapped onto an exit status.
#[derive(Debug)]
pub enum CliError {
    Json(serde_json::Error),
    Io(String),
    Invalid(String),
    Lab(LabError),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Lab(e) if e.is_convergence_failure() => EXIT_NONCONVERGENCE,
            _ => EXIT_VALIDATION,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Json(e) => format!("invalid JSON: {e}"),
            CliError::Io(m) | CliError::Invalid(m) => m.clone(),
            CliError::Lab(e) => e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: String,
    kind: &'a str,
    exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<usize>,
}

pub fn run(cli: &Cli) -> Output {
    match commands::dispatch(&cli.command) {
        Ok(stdout) => Output { code: EXIT_OK, stdout, stderr: String::new() },
        Err(e) => {
            let code = e.code();
            let (line, column) = match &e {
                CliError::Json(j) => (Some(j.line()), Some(j.column())),
                _ => (None, None),
            };
            let kind = if code == EXIT_NONCONVERGENCE { "non_convergence" } else { "validation" };
            let report = ErrorReport { error: e.message(), kind, exit_code: code, line, column };
            let stderr = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
            Output { code, stdout: String::new(), stderr }
        }
    }
}
