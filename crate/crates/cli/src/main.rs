//! `cogniplan`: approximation checks, interference budgets, SINR cdfs,
//! single-realization allocation and parameter sweeps from the command line.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.

mod commands;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cogniplan", version, about = "Underlay OFDMA interference management simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Config file, or one of the presets: default, fig2a, fig2b, fig3, fig4, fig5, fig6.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Override one config key, e.g. `--set rho=0.5` or `--set system.p_t=20`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Master seed (overrides `system.seed`)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "COGNIPLAN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare the moment-matched chi-square cdf with Monte-Carlo draws.
    ApproxCheck {
        /// Negative control: halve the fitted weight before comparing.
        #[arg(long)]
        halve_xi: bool,
    },
    /// Print the deterministic interference budget.
    Budget,
    /// Closed-form against empirical cdf of the normalized SINR.
    Cdf,
    /// Solve one channel realization and print the allocation.
    Allocate {
        /// Also write the dual iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Ergodic rate over a parameter grid.
    Sweep {
        /// Also write per-realization diagnostics as CSV.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Run the invariant suite: budget oracle, cdf fidelity, KKT residuals.
    Validate,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Check(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Check(_) | CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<cogniplan::Error> for CliError {
    fn from(e: cogniplan::Error) -> Self {
        match e {
            cogniplan::Error::Config(_) | cogniplan::Error::Domain(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    let s = settings::resolve(cli.common.config.as_deref(), &cli.common.overrides, cli.common.seed)?;
    let out = cli.common.output.as_deref();
    match cli.command {
        Command::ApproxCheck { halve_xi } => commands::approx_check(&s, halve_xi, out),
        Command::Budget => commands::budget(&s, out),
        Command::Cdf => commands::cdf(&s, out),
        Command::Allocate { trace } => commands::allocate(&s, out, trace.as_deref()),
        Command::Sweep { diagnostics } => commands::sweep(&s, out, diagnostics.as_deref()),
        Command::Validate => commands::validate(&s, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cogniplan: {e}");
            ExitCode::from(e.code())
        }
    }
}
