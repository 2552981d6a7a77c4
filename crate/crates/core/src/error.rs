use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sharing policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid basis subset: {0}")]
    InvalidSubset(String),
    #[error("degenerate Lagrange basis: nodes {0} and {1} coincide")]
    DegenerateBasis(f64, f64),
    #[error("insufficient shares: need {needed}, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("operands were shared under different policies")]
    IncompatibleSharing,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("opened masked value {0:e} is below the singularity threshold after retries")]
    NearSingularMask(f64),
    #[error("random mask matrix stayed singular after {0} attempts")]
    SingularMaskMatrix(u32),
    #[error("degenerate pivot at row {row}")]
    DegeneratePivot { row: usize },
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid leakage scenario: {0}")]
    InvalidScenario(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
