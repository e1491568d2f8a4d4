use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum KornError {
    #[error("singular parametrization: {metric} = {value:.3e} at (theta={theta:.4}, z={z:.4})")]
    SingularParametrization {
        metric: &'static str,
        value: f64,
        theta: f64,
        z: f64,
    },

    #[error("shift singularity: 1 + t*kappa = {value:.4} < 1/2 at node {node}; thickness too large for curvature")]
    ShiftSingularity { value: f64, node: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("search maximum at bracket edge (log10 s*h = {log10_sh:.3}); widen the bracket")]
    BracketEdge { log10_sh: f64 },

    #[error("ansatz support overflow: support width {width:.4} exceeds extent {extent:.4}")]
    SupportOverflow { width: f64, extent: f64 },

    #[error("under-resolved: {nodes} nodes across support, need at least {required}")]
    UnderResolved { nodes: usize, required: usize },

    #[error("rejected: {0}")]
    Rejected(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = KornError> = std::result::Result<T, E>;

impl KornError {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        KornError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KornError::Io {
            path: path.into(),
            source,
        }
    }
}
