//! Error type shared by the library.

use thiserror::Error;

/// Unified error for instance handling, solving, and partition operations.
#[derive(Debug, Error)]
pub enum CcspError {
    /// Caller-supplied data is out of range or malformed (maps to CLI exit 1).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An operation was invoked outside its documented preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical failure or resource exhaustion inside a solve.
    #[error("solver failure: {0}")]
    Solver(String),

    /// The original problem admits no chance-feasible point.
    #[error("infeasible problem: {0}")]
    Infeasible(String),

    /// External-solver adapter failure, carrying captured process output.
    #[error("external solver failure: {message}\nstdout: {stdout}\nstderr: {stderr}")]
    Adapter {
        message: String,
        stdout: String,
        stderr: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
