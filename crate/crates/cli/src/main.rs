//! `cacheopt` command-line front end.
//!
//! Exit codes: 0 success, 1 solver or self-test failure, 2 malformed input,
//! 3 instance too large for exact evaluation.

mod commands;
mod instance;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::instance::InstanceArgs;

#[derive(Debug, Parser)]
#[command(name = "cacheopt", version, about = "Cache placement optimizer for coded caching with nonuniform demands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// Human-readable layout; for sweeps, whitespace-separated columns with a `#` header.
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Closed-form file-grouping search.
    Grouping,
    /// Direct LP over popularity-first placements, or over all placements when sizes differ.
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bound {
    P1,
    P2,
    P5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vary {
    Cache,
    Theta,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal placement for the modified scheme, with bounds.
    Optimize {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value_t = Method::Grouping)]
        method: Method,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Lower bound on the average rate under uncoded placement.
    Bound {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Defaults to p1, or p5 when file sizes differ.
        #[arg(long, value_enum)]
        which: Option<Bound>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Rates and bounds over a grid of cache sizes or Zipf exponents.
    Sweep {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value_t = Vary::Cache)]
        vary: Vary,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        step: f64,
        /// Add the unrestricted-placement optimum and the sized bound (columns p4, lb_p5).
        #[arg(long)]
        extra: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Per-demand rates of a given placement.
    Rate {
        /// JSON matrix [N][K+1], or the JSON output of `optimize`.
        #[arg(long, value_name = "PATH")]
        placement: PathBuf,
        /// Comma-separated 1-based file indices, one per user.
        #[arg(long)]
        demand: String,
        /// File sizes as a JSON array; defaults to unit sizes.
        #[arg(long, value_name = "JSON")]
        sizes: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Quick numeric self-checks; one PASS/FAIL line each.
    Selftest,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    TooLarge(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
            CliError::TooLarge(_) => 3,
        }
    }

    fn line(&self) -> String {
        let (tag, msg) = match self {
            CliError::Input(m) => ("input", m),
            CliError::TooLarge(m) => ("too_large", m),
            CliError::Failed(m) => ("failed", m),
        };
        format!("error[{tag}]: {}", msg.replace('\n', " "))
    }
}

impl From<cacheopt::Error> for CliError {
    fn from(e: cacheopt::Error) -> Self {
        use cacheopt::Error as E;
        match e {
            E::TooLarge(_) => CliError::TooLarge(e.to_string()),
            E::Lp(_) | E::InvalidCandidate(_) => CliError::Failed(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CACHEOPT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("CACHEOPT_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failed(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Optimize { instance, method, format, out } => {
            commands::optimize(&instance, method, format, out.as_deref())
        }
        Command::Bound { instance, which, format, out } => {
            commands::bound(&instance, which, format, out.as_deref())
        }
        Command::Sweep { instance, vary, start, stop, step, extra, format, out } => {
            let spec = commands::SweepSpec { vary, start, stop, step, extra };
            commands::sweep(&instance, &spec, format, out.as_deref())
        }
        Command::Rate { placement, demand, sizes, format, out } => {
            commands::rate(&placement, &demand, sizes.as_deref(), format, out.as_deref())
        }
        Command::Selftest => commands::selftest(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let msg = first.trim_start_matches("error: ");
            eprintln!("{}", CliError::Input(msg.to_string()).line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code())
        }
    }
}
