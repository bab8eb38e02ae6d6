//! Command-line driver: `verify`, `sample` and `experiment`.
//!
//! Exit codes are stable:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | verification failed (a deviation above tolerance) |
//! | 2 | usage error (bad flags, unknown names, malformed config file) |
//! | 3 | config error (well-formed but invalid values, missing seed) |
//! | 4 | capacity error (an exact enumeration exceeded its cap) |
//! | 5 | I/O error |

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod experiment;
pub mod manifest;
pub mod sample;
pub mod verify;

pub use manifest::RunManifest;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_CAPACITY: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("verification failed: {0}")]
    Failed(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => EXIT_FAILED,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Capacity(_) => EXIT_CAPACITY,
            CliError::Io(_) => EXIT_IO,
        }
    }

    /// Maps a library error, prefixing `context` (typically the graph name).
    pub fn from_core(e: ghostfield::Error, context: &str) -> Self {
        use ghostfield::Error as E;
        let msg = if context.is_empty() {
            e.to_string()
        } else {
            format!("{context}: {e}")
        };
        match e {
            E::Capacity { .. } => CliError::Capacity(msg),
            E::Io(_) | E::Csv(_) | E::Json(_) => CliError::Io(msg),
            E::InvalidInput(_) | E::ZeroMeasure(_) | E::Parse { .. } => CliError::Config(msg),
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ghostfield::Error> for CliError {
    fn from(e: ghostfield::Error) -> Self {
        CliError::from_core(e, "")
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ghostfield", version, about = "Exact checks, samplers and experiments for the critical Ising model in a ghost field")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Multiplies every sweep budget.
    #[arg(long = "budget-scale", global = true)]
    pub budget_scale: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every exact identity over the graph corpus.
    Verify,
    /// Draw random-cluster or current-trace samples and dump them.
    Sample,
    /// Run one of the numerical experiments.
    Experiment {
        /// decay, onearm, rsw, hR, loops or rectangles.
        name: String,
    },
}

/// Parses `args`, runs the command and reports errors on stderr.
pub fn run_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let command: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, &command) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

/// Runs a parsed command. `command` is recorded verbatim in the manifest.
pub fn run(cli: &Cli, command: &[String]) -> CliResult<()> {
    if let Some(scale) = cli.budget_scale {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(CliError::Usage(format!("--budget-scale {scale} must be positive")));
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Verify => verify::cmd_verify(cli, command),
        Command::Sample => sample::cmd_sample(cli, command),
        Command::Experiment { name } => experiment::cmd_experiment(name, cli, command),
    })
}

/// Reads a TOML file into a table. Unreadable files are I/O errors, syntax
/// errors are usage errors.
pub fn read_table(path: &Path) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
}

/// Deserializes a merged table, treating unknown keys and type mismatches as
/// a malformed config.
pub fn decode<T: serde::de::DeserializeOwned>(table: toml::Table, what: &str) -> CliResult<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Usage(format!("malformed {what} config: {e}")))
}

pub fn seed_from_table(table: &toml::Table) -> CliResult<Option<u64>> {
    match table.get("seed") {
        None => Ok(None),
        Some(toml::Value::Integer(s)) if *s >= 0 => Ok(Some(*s as u64)),
        Some(v) => Err(CliError::Config(format!("seed must be a nonnegative integer, got {v}"))),
    }
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
