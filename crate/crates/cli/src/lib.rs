//! Experiment harness around the `lrwave` solvers: TOML configs, a preset
//! catalog, and CSV output for residual histories, singular values, timings
//! and cross sections.

pub mod catalog;
pub mod config;
pub mod experiment;

pub use config::ExperimentConfig;
pub use experiment::{compare_with_oracle, run_experiment, sweep, OracleReport, RunReport, SweepReport};

use std::path::PathBuf;

/// Errors surfaced by the harness, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("could not parse config: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerics(lrwave::Error),

    #[error("resource limit: {0}")]
    Resources(lrwave::Error),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit code: 2 for config problems, 3 for numerical failures,
    /// 4 for resource limits, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) => 2,
            CliError::Numerics(_) => 3,
            CliError::Resources(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: e.to_string() }
    }
}

impl From<lrwave::Error> for CliError {
    fn from(e: lrwave::Error) -> Self {
        match e {
            lrwave::Error::Parameter { name, reason } => CliError::Config { field: name.to_string(), reason },
            lrwave::Error::Unsupported(reason) => CliError::Config { field: "problem".into(), reason },
            e @ lrwave::Error::DimensionCap { .. } => CliError::Resources(e),
            e => CliError::Numerics(e),
        }
    }
}
