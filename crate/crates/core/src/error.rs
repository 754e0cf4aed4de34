use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate lifting: Jacobian singular value {sigma:.3e} is below the rank tolerance {tolerance:.3e}")]
    DegenerateLifting { sigma: f64, tolerance: f64 },

    #[error("numerical blow-up in adaptation step (|nu| = {nu_norm:.3e}, dt = {dt:.3e}); reduce dt")]
    NumericalBlowup { nu_norm: f64, dt: f64 },

    #[error("ill-conditioned regression data: smallest Gram eigenvalue {min_eigenvalue:.3e}")]
    IllConditionedData { min_eigenvalue: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("QP solver exceeded the iteration cap of {cap}")]
    SolverFailure { cap: usize },

    #[error("safety QP infeasible with slack disabled, state = {state:?}")]
    ControllerInfeasible { state: Vec<f64> },

    #[error("plant state became non-finite: {state:?}")]
    Divergence { state: Vec<f64> },

    #[error("empty run log")]
    EmptyLog,

    #[error("at step {step} (t = {t:.4} s, state = {state:?}): {source}")]
    AtStep {
        step: usize,
        t: f64,
        state: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
