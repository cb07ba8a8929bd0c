use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CajError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CajError {
    /// Invalid frame, scenario or CLI configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative kernel did not converge or produced non-finite output.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input is rank-deficient in a way the operation cannot recover from.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The detector cannot separate the requested streams.
    #[error("detection infeasible: {0}")]
    Infeasible(String),

    /// A metric was requested over an empty ensemble.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CajError {
    pub fn config(msg: impl Into<String>) -> Self {
        CajError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CajError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the `cajsim` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            CajError::Config(_) => 2,
            CajError::Numerical(_)
            | CajError::Degenerate(_)
            | CajError::Domain(_)
            | CajError::Infeasible(_)
            | CajError::UndefinedMetric(_) => 3,
            CajError::Io { .. } | CajError::Csv { .. } => 1,
        }
    }

    /// True for errors that make a single frame unusable without invalidating
    /// the sweep it belongs to.
    pub fn is_per_frame(&self) -> bool {
        matches!(
            self,
            CajError::Degenerate(_) | CajError::Infeasible(_) | CajError::Numerical(_)
        )
    }
}
