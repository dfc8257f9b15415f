use thiserror::Error;

/// Errors raised by the numerical kernels, the generator and the estimator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrailtyError {
    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("{what} did not converge within {iterations} iterations")]
    MaxIterations { what: &'static str, iterations: usize },
    #[error("non-finite value encountered in {0}")]
    NonFiniteValue(&'static str),
    #[error("argument {arg} outside the domain of {function}")]
    DomainError { function: &'static str, arg: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical underflow in {0}")]
    NumericalUnderflow(&'static str),
    #[error("cumulative hazard never reaches target {target}")]
    BracketExpansionFailure { target: f64 },
    #[error("censoring target rate {rate} unreachable")]
    NoSolution { rate: f64 },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("profile score Jacobian is singular; use the bootstrap estimator instead")]
    SingularJacobian,
    #[error("only {converged} of {requested} bootstrap replicates converged")]
    TooFewConverged { converged: usize, requested: usize },
}

pub type Result<T> = std::result::Result<T, FrailtyError>;
