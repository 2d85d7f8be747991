use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported polynomial degree {0} (supported: 1..=8)")]
    UnsupportedDegree(usize),
    #[error("grid size {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("unsupported dimension {0} (supported: 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row}); this indicates an assembly bug")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("singular diagonal block at element {0}")]
    SingularBlock(usize),
    #[error("structural error: {0}")]
    Structure(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("preconditioner is not positive definite: (z, r) = {0:e}")]
    IndefinitePreconditioner(f64),
    #[error("convergence factor undefined: {0}")]
    UndefinedRho(String),
}

pub type Result<T> = std::result::Result<T, Error>;
