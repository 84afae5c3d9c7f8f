use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("trace spaces are not nested on edge {edge}: {detail}")]
    NotNested { edge: usize, detail: String },

    #[error("inconsistent multi-patch structure: {0}")]
    Structural(String),

    #[error("degenerate geometry on patch {patch}: |det J| = {det:e}")]
    DegenerateGeometry { patch: usize, det: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("basis elimination stalled after {steps} steps with {remaining} non-zero constraint rows")]
    EliminationStalled { steps: usize, remaining: usize },

    #[error("basis verification failed on level {level}: {detail}")]
    BasisCheck { level: usize, detail: String },

    #[error("solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
