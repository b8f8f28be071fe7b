use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative deviation {0:.3e})")]
    NonHermitianInput(f64),

    #[error("eigensolver did not converge within {0} sweeps")]
    ConvergenceFailure(usize),

    #[error("eigenvalue {eigenvalue:.3e} below floor {floor:.3e}")]
    SingularOperand { eigenvalue: f64, floor: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("partition function must be positive (Z_i = {z_i}, Z_f = {z_f})")]
    NonpositivePartitionFunction { z_i: f64, z_f: f64 },

    #[error("support of the first argument is not contained in the support of the second")]
    SupportViolation,

    #[error("integration unstable: trace drift {0:.3e}")]
    IntegrationUnstable(f64),

    #[error("map is not completely positive (Choi min eigenvalue {0:.3e})")]
    CompletePositivityViolation(f64),

    #[error("eigenvalue-1 subspace has dimension {0}, expected 1")]
    NoUniqueFixedPoint(usize),

    #[error("fixed point is singular (min eigenvalue {0:.3e})")]
    SingularFixedPoint(f64),

    #[error("state is not a fixed point of the channel (residual {0:.3e})")]
    NotAFixedPoint(f64),

    #[error("reference state is singular (min eigenvalue {0:.3e})")]
    SingularReference(f64),

    #[error("optimization did not converge: {0}")]
    OptimizationNotConverged(String),

    #[error("marginals are not thermal (deviation {0:.3e})")]
    MarginalsNotThermal(f64),

    #[error("decomposition inapplicable: {0}")]
    DecompositionInapplicable(String),

    #[error("distributions have different label sets")]
    LabelMismatch,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
