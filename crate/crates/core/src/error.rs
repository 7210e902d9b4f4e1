use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("odd-degree expression (degree {0}) cannot be a sum of squares")]
    OddDegree(usize),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("expression is not affine in the free decision blocks: {0}")]
    NotAffine(String),

    #[error("polynomial fit failed validation: worst violation {violation:.3e} at ({x:.6}, {y:.6})")]
    InfeasibleFit { x: f64, y: f64, violation: f64 },

    #[error("degenerate axis {axis}: positions have zero spread")]
    DegenerateAxis { axis: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
