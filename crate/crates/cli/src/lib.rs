//! Experiment driver: TOML configuration, the end-to-end sparse-PCA pipeline
//! and the parameter-bounds report behind the `thanos` binary.

pub mod config;
pub mod experiment;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiment::{bounds_report, run_experiment, RunOverrides, RunSummary};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INGESTION: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("could not read input: {0}")]
    Ingestion(thanos_core::Error),
    #[error("run diverged: {0}")]
    Divergence(thanos_core::Error),
    #[error("{0}")]
    Other(thanos_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Ingestion(_) => exit::INGESTION,
            CliError::Divergence(_) => exit::DIVERGENCE,
            CliError::Other(_) => exit::OTHER,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }
}
