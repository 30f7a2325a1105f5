//! Error types shared across the library.

use thiserror::Error;

/// Errors produced by estimation, criterion evaluation, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A candidate model refers to columns the design does not have, is
    /// empty, or is not strictly increasing.
    #[error("invalid candidate model: {0}")]
    InvalidCandidate(String),

    /// The design matrix (or a candidate submatrix) is rank deficient.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// Matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The observation pair violates a standing assumption.
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// Shrinkage requires at least three response dimensions.
    #[error("Stein condition violated: {0}")]
    SteinCondition(String),

    /// A degrees-of-freedom denominator is not positive.
    #[error("nonpositive degrees of freedom: {0}")]
    DegreesOfFreedom(String),

    /// A quadratic-form statistic is zero or non-finite.
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// A covariance (or residual cross-product) matrix is not positive
    /// definite where an inverse is needed.
    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    /// The ridge-form penalty is undefined because some c ≤ λ.
    #[error("nonpositive ridge penalty: {0}")]
    NonpositivePenalty(String),

    /// A scenario or grid point violates a feasibility inequality.
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    /// More than the tolerated share of Monte Carlo replications failed.
    #[error("too many failed replications: {0}")]
    TooManyFailures(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file could not be parsed (CSV matrix or JSON scenario).
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors that signal bad input rather than an I/O failure.
    /// The CLI maps these to exit code 2 and I/O failures to exit code 1.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
