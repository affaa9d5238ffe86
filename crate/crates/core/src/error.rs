use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("point {re}+{im}i is not on the unit circle (|z| = {modulus})")]
    NotUnitModulus { re: f64, im: f64, modulus: f64 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dependency hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("negative spacer {value} at stage {stage}, column {column}")]
    NegativeSpacer { stage: usize, column: usize, value: i128 },

    #[error("lag {lag} cannot be certified: {reason}")]
    Certification { lag: u128, reason: String },

    #[error("degenerate set: {0}")]
    DegenerateSet(String),
}
