use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sulcal depth toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid {element} {index}: {message}")]
    Validation {
        element: &'static str,
        index: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("mesh is not closed: {boundary_edges} boundary edge(s)")]
    NotClosed { boundary_edges: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("eigensolver error: {0}")]
    Eigensolver(String),

    #[error("inflation diverged at iteration {iteration}: vertex {vertex} moved {displacement:.3e} mm")]
    Divergence {
        iteration: usize,
        vertex: usize,
        displacement: f64,
    },

    #[error("vertex {to} is unreachable from vertex {from}")]
    Unreachable { from: usize, to: usize },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
