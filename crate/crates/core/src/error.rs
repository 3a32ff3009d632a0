use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {found} nodes but the grid has {expected}")]
    ShapeMismatch { expected: usize, found: usize },

    /// The induced metric is (numerically) singular at some node.
    #[error("degenerate immersion at node ({i}, {j}): det g = {det:e} <= {threshold:e}")]
    DegenerateImmersion {
        i: usize,
        j: usize,
        det: f64,
        threshold: f64,
    },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    /// An assembled operator was used with geometry it was not built from.
    #[error("operator was assembled for a different immersion")]
    StaleOperator,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Time integration stopped because the state became degenerate.
    #[error("integration aborted at t = {t}: {source}")]
    IntegrationAborted {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("radius collapses to zero at t = {t}")]
    SphereCollapse { t: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    /// Every problem found in a configuration, in source order.
    #[error("{}", crate::io::config::render_issues(.0))]
    Config(Vec<crate::io::config::ConfigIssue>),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
