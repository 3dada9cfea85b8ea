use thiserror::Error;

/// Errors raised by the homogenization engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("map inversion did not reach tolerance after {iterations} iterations (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("mean gradient is singular or orientation-reversing (det = {det:e})")]
    SingularMean { det: f64 },

    #[error("non-finite coefficient at point {point:?}")]
    NonFiniteCoefficient { point: Vec<f64> },

    #[error("iterative solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("coefficient is not elliptic at y = {point:?} (smallest Hermitian-part eigenvalue {eigenvalue:e})")]
    NonElliptic { point: Vec<f64>, eigenvalue: f64 },

    #[error("medium is not dissipative at y = {point:?}, p = {p} (smallest Hermitian-part eigenvalue {eigenvalue:e})")]
    NonDissipative {
        point: Vec<f64>,
        p: String,
        eigenvalue: f64,
    },

    #[error("mesh does not resolve the oscillation scale: h = {h} > epsilon/8 = {limit}")]
    UnresolvedScale { h: f64, limit: f64 },

    #[error("supercell of size {available} cannot hold the scaled window (needs {required})")]
    SupercellTooSmall { required: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
