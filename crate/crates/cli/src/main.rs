//! `spectc`: generate device populations, compact specification test sets,
//! classify devices with guard-banded models or lookup tables, and export
//! tester-side tables.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration/validation error.

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Configuration or validation problem (exit 2) versus I/O failure (exit 1).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<spectc_core::DataError> for CliError {
    fn from(e: spectc_core::DataError) -> Self {
        use spectc_core::DataError::*;
        match e {
            Io(_) | Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<spectc_core::syngen::GenError> for CliError {
    fn from(e: spectc_core::syngen::GenError) -> Self {
        match e {
            spectc_core::syngen::GenError::Data(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<spectc_core::CompactError> for CliError {
    fn from(e: spectc_core::CompactError) -> Self {
        match e {
            spectc_core::CompactError::Data(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<spectc_core::GridError> for CliError {
    fn from(e: spectc_core::GridError) -> Self {
        match e {
            spectc_core::GridError::Io(io) => CliError::Io(io.to_string()),
            spectc_core::GridError::Data(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<spectc_core::GuardBandError> for CliError {
    fn from(e: spectc_core::GuardBandError) -> Self {
        match e {
            spectc_core::GuardBandError::Data(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<spectc_core::SvcError> for CliError {
    fn from(e: spectc_core::SvcError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "spectc", version, about = "Statistical specification test-set compaction")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GlobalOpts {
    /// Master seed; all per-phase randomness derives from it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output directory (default: $SPECTC_OUT or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Optional JSON config file providing subcommand defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suppress informational output.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,
}

impl GlobalOpts {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn quiet(&self) -> bool {
        self.quiet
    }

    pub fn config(&self) -> Option<&PathBuf> {
        self.config.as_ref()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("SPECTC_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic device population (dataset CSV + spec JSON).
    Generate(commands::GenerateArgs),
    /// Run greedy test-set compaction against a train/test pair.
    Compact(commands::CompactArgs),
    /// Classify devices with a guard-band model or an exported lookup table.
    Classify(commands::ClassifyArgs),
    /// Export a guard-band model as a tester-side grid lookup table.
    ExportLut(commands::ExportLutArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::cmd_generate(&cli.global, args),
        Command::Compact(args) => commands::cmd_compact(&cli.global, args),
        Command::Classify(args) => commands::cmd_classify(&cli.global, args),
        Command::ExportLut(args) => commands::cmd_export_lut(&cli.global, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
