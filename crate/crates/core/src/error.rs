use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, shape tools and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has {got} values but the grid has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{solver} did not converge after {iterations} iterations (last residual {last:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("E not inside shape: {0}")]
    ENotInsideShape(String),

    #[error("g ∉ F_s: {0}")]
    NotInFs(String),

    #[error("g ∉ F: {0}")]
    NotInF(String),

    #[error("no admissible level shift found after {attempts} attempts: {report}")]
    NoAdmissibleShift { attempts: usize, report: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed field file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
