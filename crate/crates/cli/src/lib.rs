//! Command-line front end for `bcs-edge-core`.
//!
//! [`run`] is the whole program; `main` only sets up logging and exits with
//! its return value. Exit codes: 0 success, 1 usage, 2 numeric failure,
//! 3 partial sweep.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Environment variable overriding `--threads`.
pub const THREADS_ENV: &str = "BCS_EDGE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

impl From<Bc> for bcs_edge_core::bs_operator::BoundaryCondition {
    fn from(b: Bc) -> Self {
        match b {
            Bc::Dirichlet => Self::Dirichlet,
            Bc::Neumann => Self::Neumann,
        }
    }
}

impl std::str::FromStr for Bc {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Bc as ValueEnum>::from_str(s, true)
    }
}

/// Flags shared by every computing subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Chemical potential.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Relative tolerance on critical temperatures.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Absolute self-convergence tolerance of momentum grids.
    #[arg(long)]
    pub grid_tol: Option<f64>,
    /// Gauss–Legendre points per panel.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Multiplier of the momentum cutoff.
    #[arg(long)]
    pub cutoff_factor: Option<f64>,
    /// Worker threads (overridden by BCS_EDGE_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file; a manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat key = value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "bcs-edge", version, about = "BCS critical temperatures on the line and half-line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bulk critical temperature for each coupling.
    TcBulk {
        #[command(flatten)]
        common: Common,
        /// Coupling constant (repeatable).
        #[arg(long = "v")]
        v: Vec<f64>,
    },
    /// Half-line critical temperature for each coupling.
    TcBoundary {
        #[command(flatten)]
        common: Common,
        #[arg(long = "v")]
        v: Vec<f64>,
        #[arg(long, value_enum)]
        bc: Option<Bc>,
    },
    /// Bulk and half-line temperatures over a log-spaced coupling sweep.
    RatioCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        bc: Option<Bc>,
        #[arg(long)]
        v_min: Option<f64>,
        #[arg(long)]
        v_max: Option<f64>,
        #[arg(long)]
        v_count: Option<usize>,
    },
    /// Top eigenpair of the discretized half-line operator.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Temperature.
        #[arg(long = "t")]
        t: Option<f64>,
        #[arg(long, value_enum)]
        bc: Option<Bc>,
    },
    /// Trial-state certificate for a positive Dirichlet gap.
    TrialGap {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t")]
        t: Vec<f64>,
        /// Gaussian width of the trial state (default: mu).
        #[arg(long)]
        b: Option<f64>,
        /// Locate the temperature where the bound changes sign instead.
        #[arg(long)]
        find_t0: bool,
    },
    /// Low-temperature residual of the bulk integral and high-temperature
    /// scaled spectra.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t")]
        t: Vec<f64>,
    },
    /// Randomized checks of the kernel inequalities.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        /// Scale every checked left-hand side by (1 + eps).
        #[arg(long, hide = true, allow_negative_numbers = true)]
        perturb_kernel: Option<f64>,
    },
    /// Re-run a command from its manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses a full argument vector (including the program name).
pub fn parse_args<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(args)
}

/// Runs the program and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\nRun `bcs-edge <command> --help` for usage.");
            }
            e.exit_code()
        }
    }
}
