use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix market {path:?} line {line}: {msg}")]
    MatrixMarket {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("degenerate tetrahedron {tet} (signed volume {volume:e})")]
    DegenerateElement { tet: usize, volume: f64 },

    #[error("mesh does not match channel extents: {0}")]
    ChannelMismatch(String),

    #[error("incomplete Cholesky: nonpositive pivot {value:e} at row {row}")]
    IcholPivot { row: usize, value: f64 },

    #[error("{method} breakdown at iteration {iteration}: {detail}")]
    Breakdown {
        method: &'static str,
        iteration: usize,
        detail: String,
    },

    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("matrix is not symmetric positive definite (pivot {pivot:e} at {index})")]
    NotSpd { index: usize, pivot: f64 },

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("dense oracle limited to n <= {limit}, got {n}")]
    OracleScale { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
