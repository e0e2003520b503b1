use std::path::PathBuf;

/// Why a single SGLD chain was dropped from an estimate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainDivergence {
    pub chain: usize,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: non-finite value in {context} at index {index}")]
    NonFinite { context: String, index: usize },

    #[error("solver failed to converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("{} of {} sampler chains diverged", .report.len(), .chains)]
    Divergence {
        chains: usize,
        report: Vec<ChainDivergence>,
    },

    #[error("insufficient samples: epsilon {epsilon:e} collected {hits} hits (need at least {required})")]
    InsufficientSamples {
        epsilon: f64,
        hits: usize,
        required: usize,
    },

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("run aborted at epoch {epoch}: {source}")]
    RunAborted {
        epoch: usize,
        #[source]
        source: Box<Error>,
        partial: Box<crate::harness::RunOutput>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 for bad configuration, 3 for
    /// numeric or solver failure. Bad input files and unwritable outputs
    /// count as configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::Solver { .. } | Error::Divergence { .. } => 3,
            Error::RunAborted { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

/// Returns the index of the first non-finite entry, if any.
pub(crate) fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

pub(crate) fn ensure_finite(values: &[f64], context: &str) -> Result<()> {
    match first_non_finite(values) {
        Some(index) => Err(Error::NonFinite {
            context: context.to_string(),
            index,
        }),
        None => Ok(()),
    }
}
