use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Space;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a {expected:?}-space field, got {found:?}")]
    WrongSpace { expected: Space, found: Space },

    #[error("grid mismatch: N={left} L_tot={left_len} vs N={right} L_tot={right_len}")]
    GridMismatch {
        left: usize,
        left_len: f64,
        right: usize,
        right_len: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerical instability at t={t} (step {step_index})")]
    Instability { t: f64, step_index: u64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("snapshot format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
