use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Variants are split along the line the command-line front end cares about:
/// [`Error::is_numerical`] distinguishes failures of a computation from bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too coarse: {interior} interior nodes (need at least {required})")]
    GridTooCoarse { interior: usize, required: usize },

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at node ({i}, {j}) = ({x:.6}, {y:.6})")]
    NonFinite { i: usize, j: usize, x: f64, y: f64 },

    #[error("{0}")]
    Undefined(&'static str),

    #[error("curvature {curvature:.6} at boundary point ({x:.6}, {y:.6}) exceeds the bound {bound:.6}")]
    CurvatureViolation { curvature: f64, bound: f64, x: f64, y: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of a computation (as opposed to rejected input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Numerical(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
