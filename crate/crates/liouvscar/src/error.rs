use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty basis: no admissible configuration for the requested sector")]
    EmptyBasis,
    #[error("resource budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget { what: String, needed: u64, budget: u64 },
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("symmetry generator does not close on the basis: {0}")]
    NotClosed(String),
    #[error("block leakage {value:.3e} between doubled indices {row} and {col}")]
    Leakage { value: f64, row: usize, col: usize },
    #[error("operator does not commute with symmetry: |[H, U]|={value:.3e} at ({row}, {col})")]
    NonCommuting { value: f64, row: usize, col: usize },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("eigen-decomposition residual {0:.3e} exceeds tolerance")]
    Residual(f64),
    #[error("dicke embedding failed verification, residual {0:.3e}")]
    Embedding(f64),
    #[error("dyson iteration did not converge after {iterations} iterations, residual {residual:.3e}")]
    DysonNoConvergence { iterations: usize, residual: f64 },
    #[error("singular resolvent")]
    SingularResolvent,
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("integration failed: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
