//! Benchmark harness for the `idealframe` propagation library: scenario
//! files, single propagation runs with CSV trajectory output, and
//! work–precision comparison grids across formulations and tolerances.

pub mod commands;
pub mod report;
pub mod scenario;
pub mod selftest;

/// Harness-level error, mapped onto the process exit codes:
/// 1 usage / bad input, 2 numeric failure, 3 I/O.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(#[from] idealframe::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}
