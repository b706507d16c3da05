//! Command-line driver for the periodic superposition solver.

pub mod args;
pub mod commands;
pub mod points;
pub mod problem;

use std::path::Path;

use pim_core::PimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, problem file or point data. Exit code 1.
    #[error("{0}")]
    Validation(String),
    /// A series failed to converge or hit a Rayleigh-Wood anomaly. Exit code 2.
    #[error("{0}")]
    Series(String),
    /// Exit code 3.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Series(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn context(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{p}: {m}")),
            CliError::Series(m) => CliError::Series(format!("{p}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{p}: {m}")),
        }
    }
}

impl From<PimError> for CliError {
    fn from(e: PimError) -> Self {
        let msg = e.to_string();
        match e {
            PimError::Validation(_) | PimError::InvalidInput(_) | PimError::Internal(_) => CliError::Validation(msg),
            PimError::WoodAnomaly { .. } | PimError::NotConverged { .. } | PimError::Tabulation { .. } | PimError::Domain(_) => {
                CliError::Series(msg)
            }
            PimError::Io(_) => CliError::Io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
