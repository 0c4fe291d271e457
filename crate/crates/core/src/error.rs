use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: orbital index {index} outside [1, {norb}]")]
    IndexRange { line: usize, index: i64, norb: usize },

    #[error("{0}")]
    Domain(String),

    #[error("{what} requires {requested} elements, cap is {cap}")]
    Size {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("{0}")]
    Unsupported(String),

    #[error("Davidson did not converge in {iterations} iterations (best residual {best_residual:.3e})")]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
    },

    #[error("no shot carries the target particle numbers ({n_alpha}, {n_beta}); lower the noise or take more shots")]
    NoValidShots { n_alpha: u32, n_beta: u32 },

    #[error("least-squares design is singular: {0}")]
    SingularFit(String),

    #[error("every batch failed in recovery step {step}")]
    AllBatchesFailed { step: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numerical failures (as opposed to bad input or configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SingularFit(_)
                | Error::AllBatchesFailed { .. }
                | Error::NoValidShots { .. }
                | Error::Size { .. }
        )
    }
}
