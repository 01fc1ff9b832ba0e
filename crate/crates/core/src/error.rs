use thiserror::Error;

/// A violated invariant on one of the input records.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("rho = {0} lies outside [-1, 1]")]
    RhoOutOfRange(f64),
    #[error("{name} must be > 0 (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("{name} must be >= 0 (got {value})")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("{name} is not finite")]
    NotFinite { name: &'static str },
    #[error("{name} = {value} is below the minimum of {min}")]
    TooFewSteps {
        name: &'static str,
        value: usize,
        min: usize,
    },
    #[error("theta1 = {0} must lie in (0, 1]")]
    ThetaOutOfRange(f64),
}

impl ValidationError {
    /// Name of the offending field.
    pub fn field(&self) -> &'static str {
        match self {
            ValidationError::RhoOutOfRange(_) => "rho",
            ValidationError::NonPositiveParameter { name, .. }
            | ValidationError::NegativeParameter { name, .. }
            | ValidationError::NotFinite { name }
            | ValidationError::TooFewSteps { name, .. } => name,
            ValidationError::ThetaOutOfRange(_) => "theta1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("point ({s}, {v}, {r}) lies outside the grid domain")]
    OutOfDomain { s: f64, v: f64, r: f64 },
    #[error("tridiagonal line is singular: pivot {pivot:e} at row {row}")]
    SingularLine { row: usize, pivot: f64 },
    #[error("non-finite value at step {step}, node {node:?}")]
    NonFinite { step: usize, node: [usize; 3] },
    #[error("bond delta vanishes (|theta| = {theta:e}) at R = {rate}, time to maturity {tau}")]
    DegenerateTheta { rate: f64, tau: f64, theta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
