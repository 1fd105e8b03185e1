use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("unknown or inactive cell id {0}")]
    UnknownCell(usize),
    #[error("point ({x}, {y}, {z}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64, z: f64 },
    #[error("meshes are not related by refinement: {0}")]
    UnrelatedMeshes(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("singular matrix at pivot {0}")]
    Singular(usize),
    #[error("block of size {0} is too large for a dense direct solve")]
    TooLargeForDirect(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("initial crack is not resolved by the mesh: {0}")]
    CrackNotResolved(String),
    #[error("linear solver failed: {0}")]
    LinearSolver(String),
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonNotConverged { iterations: usize, residual: f64 },
    #[error("rate fit undefined: {0}")]
    RateUndefined(String),
}

pub type Result<T> = core::result::Result<T, Error>;
