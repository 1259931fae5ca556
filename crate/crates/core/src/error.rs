use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("operator is not Hermitian: string {string} has imaginary coefficient {imag:e}")]
    NotHermitian { string: String, imag: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{qubits} qubits exceeds the configured cap of {cap}")]
    CapExceeded { qubits: usize, cap: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("energy rose from {before} to {after} across a sweep")]
    EnergyIncrease { before: f64, after: f64 },

    #[error("|<H>| = {0:e} is too small for the relative variance; shift the energy")]
    VanishingEnergy(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
