use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violates an operation precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The instance has equal means, so there is no best arm.
    #[error("instance ({mu1}, {mu2}) has no unique best arm")]
    NotInParameterSet { mu1: f64, mu2: f64 },

    /// The natural-parameter pair has equal coordinates.
    #[error("natural parameters ({xi1}, {xi2}) coincide")]
    DualDegenerate { xi1: f64, xi2: f64 },

    /// A constructed instance failed its own certificate checks.
    #[error("construction failed verification: {0}")]
    Construction(String),

    /// The recommendation rule was asked to compare an unsampled arm.
    #[error("cannot recommend: arm {arm} was never sampled")]
    Recommendation { arm: u8 },

    /// The exact engine would exceed its state budget.
    #[error("capacity exceeded: {what} needs {requested} but the limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
