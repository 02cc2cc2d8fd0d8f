//! Error taxonomy shared by the whole crate.
//!
//! Variants are grouped by what went wrong rather than where: shape
//! mismatches, out-of-domain arguments, bad data, numerical failure, broken
//! caller contracts, and unmet mathematical preconditions all carry a
//! human-readable message naming the offending quantity.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Mismatched or invalid dimensions/shapes (lengths, counts, indices).
    #[error("dimension error: {0}")]
    Dimension(String),
    /// Argument outside its mathematical domain (ranges, poles, invalid
    /// probabilities).
    #[error("domain error: {0}")]
    Domain(String),
    /// Input data is unusable: empty, non-finite, or inconsistent.
    #[error("data error: {0}")]
    Data(String),
    /// A linear system was singular or a factorization failed.
    #[error("singularity error: {0}")]
    Singular(String),
    /// Caller broke a documented contract (e.g. a policy that is not greedy
    /// for the supplied Q-function).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A mathematical precondition of a bound or estimator does not hold.
    #[error("precondition error: {0}")]
    Precondition(String),
    /// An estimator could not produce a value (e.g. every sampled ratio was
    /// degenerate).
    #[error("estimation error: {0}")]
    Estimation(String),
    /// Text parsing failed (serialized MDPs, numeric fields).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        Error::Singular(msg.into())
    }
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }
    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
