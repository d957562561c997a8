//! Command implementations behind the `driftwidth` binary.

pub mod commands;
pub mod config;

pub use commands::{gen, run, sweep, Aggregate, Spread, SummaryRecord, SweepOptions, SweepReport};
pub use config::ExperimentConfig;

use thiserror::Error;

/// Failure classes, each mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}
