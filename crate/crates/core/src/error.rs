use thiserror::Error;

/// Errors produced by construction, fitting, and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The supplied evaluation grid cannot support the requested operation.
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    /// A derivative order beyond the supported maximum was requested.
    #[error("derivative order {requested} exceeds supported maximum {max}")]
    UnsupportedOrder { requested: usize, max: usize },

    /// Too few data points for a well-posed fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Lattice points failed the strict-increase requirement.
    #[error("lattice points are not strictly increasing at index {index}")]
    NotIncreasing { index: i64 },

    /// An iterative solver ran out of iterations without meeting its tolerance.
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    /// A linear system was too ill-conditioned to solve reliably.
    #[error("linear system could not be solved: {0}")]
    SingularSystem(String),

    /// Malformed textual input.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
