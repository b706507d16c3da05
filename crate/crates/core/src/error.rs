use thiserror::Error;

/// Errors raised by the periodic solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PimError {
    /// Argument outside the domain of a kernel or special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Floquet root vanished (Rayleigh-Wood anomaly).
    #[error("Rayleigh-Wood anomaly at mode index {index:?}: |k| = {magnitude:e}")]
    WoodAnomaly { index: (i64, i64), magnitude: f64 },

    /// A series hit its term cap before meeting the tolerance.
    #[error("series not converged after {terms} terms (last relative contribution {last_rel:e})")]
    NotConverged { terms: usize, last_rel: f64 },

    /// The problem failed validation.
    #[error("invalid problem: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kernel tabulation failed at difference index {index:?}: {source}")]
    Tabulation {
        index: [i64; 3],
        #[source]
        source: Box<PimError>,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl From<std::io::Error> for PimError {
    fn from(e: std::io::Error) -> Self {
        PimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PimError>;
