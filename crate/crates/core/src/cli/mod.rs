//! Batch runner behind the `fracdiff` binary: every subcommand reads one
//! JSON config and writes its results into the output directory.
//!
//! Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 violated
//! hypothesis. Failures also print an error record as JSON on stderr and
//! leave it in `error.json` when the output directory is usable.

pub mod commands;
pub mod config;
pub mod field;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::error::{Error, ErrorCategory, Result};
pub use commands::Output;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "FRACDIFF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fracdiff", version, about = "Multi-term time-fractional diffusion experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration of the run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed of the jitter stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the forward problem and write the trace at x0.
    Simulate,
    /// Short-time expansion with a residual-slope report.
    Expand,
    /// Identify orders and coefficient ratios from a trace.
    Identify,
    /// Build data whose trace coincides with the given one.
    Twin,
    /// Test the exact coincidence conditions for two problems.
    Check,
    /// Recover initial or source coefficients from a trace.
    Recover,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Expand => "expand",
            Command::Identify => "identify",
            Command::Twin => "twin",
            Command::Check => "check",
            Command::Recover => "recover",
        }
    }
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Runs one command and returns the files it produces, without touching
/// the output directory.
pub fn execute(command: Command, config: &Path, seed: u64) -> Result<Vec<Output>> {
    let base = config.parent().unwrap_or(Path::new("."));
    match command {
        Command::Simulate => commands::simulate(&load(config)?, base, seed),
        Command::Expand => commands::expand(&load(config)?, base),
        Command::Identify => commands::identify(&load(config)?, base, seed),
        Command::Twin => commands::twin(&load(config)?, base),
        Command::Check => commands::check(&load(config)?, base),
        Command::Recover => commands::recover(&load(config)?, base),
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(path)
}

pub fn error_json(err: &Error) -> serde_json::Value {
    let category = match err.category() {
        ErrorCategory::Config => "config",
        ErrorCategory::Numerical => "numerical",
        ErrorCategory::Hypothesis => "hypothesis",
    };
    json!({
        "error": {
            "code": err.code(),
            "category": category,
            "exit_code": err.category().exit_code(),
            "message": err.to_string(),
        }
    })
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a pool set up earlier in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run_parsed(cli: &Cli) -> Result<Vec<PathBuf>> {
    configure_threads()?;
    let config = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    if cli.verbose {
        eprintln!("fracdiff {}: config {}", cli.command.name(), config.display());
    }
    let outputs = execute(cli.command, config, cli.seed)?;
    std::fs::create_dir_all(&cli.out)?;
    let mut written = Vec::new();
    for out in outputs {
        let path = write_atomic(&cli.out, &out.name, &out.contents)?;
        if cli.verbose {
            eprintln!("fracdiff {}: wrote {}", cli.command.name(), path.display());
        }
        written.push(path);
    }
    Ok(written)
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ErrorCategory::Config.exit_code() } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(&cli) {
        Ok(_) => 0,
        Err(err) => {
            let doc = error_json(&err);
            let text = serde_json::to_string_pretty(&doc).unwrap_or_default();
            eprintln!("{text}");
            if std::fs::create_dir_all(&cli.out).is_ok() {
                let _ = write_atomic(&cli.out, "error.json", &(text + "\n"));
            }
            err.category().exit_code()
        }
    }
}
