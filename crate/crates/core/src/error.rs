use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubradError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {dim}: {what}")]
    UnsupportedDimension { dim: usize, what: &'static str },
    #[error("too many local hyperplanes ({count} > {cap})")]
    HyperplaneCap { count: usize, cap: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("operation requires the Euclidean norm")]
    NonEuclidean,
    #[error("cone is not convex (union of {0} pieces)")]
    NonConvex(usize),
    #[error("infeasible specification: {0}")]
    Infeasible(String),
    #[error("perturbation is not evaluable here: {0}")]
    NotEvaluable(String),
    #[error("map is not affine")]
    NotAffine,
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, SubradError>;
