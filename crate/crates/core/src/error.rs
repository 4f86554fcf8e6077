use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficient matrix is not uniformly elliptic: minimum eigenvalue {min_eig:.3e} at {location:?}")]
    NotElliptic { min_eig: f64, location: Vec<f64> },

    #[error("axial block A11 is numerically singular (reciprocal condition {rcond:.3e})")]
    SingularBlock { rcond: f64 },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("bad resolution: {0}")]
    BadResolution(String),

    #[error("mesh would need {nodes} nodes, above the cap of {cap}")]
    MemoryBudget { nodes: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Cholesky factorization failed at pivot {pivot} (value {value:.3e})")]
    FactorizationFailed { pivot: usize, value: f64 },

    #[error("eigensolver did not converge after {restarts} restarts (best residual {residual:.3e})")]
    NoConvergence { restarts: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("test function vanishes identically")]
    ZeroFunction,

    #[error("cylinder too short for a decay fit: half-length {ell} < {min}")]
    TooShort { ell: f64, min: f64 },

    #[error("mesh or field lacks the reflection symmetry: {0}")]
    NoReflectionSymmetry(String),

    #[error("cross-section eigenfunction is not positive at interior node {node} (value {value:.3e})")]
    DegenerateWeight { node: usize, value: f64 },

    #[error("off-diagonal block does not couple to the cross-section eigenfunction (norm {norm:.3e})")]
    ConditionConFails { norm: f64 },

    #[error("sequence did not converge: {0}")]
    NotConverged(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("no data rows in {0}")]
    EmptyData(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
