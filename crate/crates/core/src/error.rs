use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature degree {degree} is not supported (maximum {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("unsupported element: {family} of order {order}")]
    UnsupportedElement { family: String, order: usize },

    #[error("expected a {expected} space, found {found}")]
    FamilyMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("linear solver failed: relative residual {residual:.3e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },

    #[error("control is not admissible: constraint violated by {violation:.3e}")]
    InvalidControl { violation: f64 },

    #[error("reference computation did not converge: {0}")]
    Precision(String),
}

pub type Result<T> = std::result::Result<T, Error>;
