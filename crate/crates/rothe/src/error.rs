use std::io;
use std::path::PathBuf;

use rothe_core::experiments::SolveError;
use thiserror::Error;

/// Process exit codes of the `rothe` binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// I/O problems and failed `verify` checks.
    pub const OTHER: i32 = 1;
    pub const SOLVER_FAILURE: i32 = 2;
    pub const CONFIG_ERROR: i32 = 3;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(rothe_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("{what}: {msg}")]
    Format { what: &'static str, msg: String },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    pub fn format(what: &'static str, msg: impl Into<String>) -> Self {
        HarnessError::Format { what, msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Invalid(_) => exit::CONFIG_ERROR,
            HarnessError::Solver(_) => exit::SOLVER_FAILURE,
            HarnessError::Io { .. } | HarnessError::Format { .. } => exit::OTHER,
        }
    }
}

impl From<SolveError> for HarnessError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Config(e) => HarnessError::Invalid(e),
            SolveError::Run { failure, .. } => HarnessError::Solver(failure.to_string()),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
