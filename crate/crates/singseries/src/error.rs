//! Error types shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation would exceed a configured resource budget.
    #[error("resource limit exceeded: {what} = {requested} is over the budget of {budget}")]
    ResourceLimit {
        what: &'static str,
        requested: u128,
        budget: u128,
    },

    /// The prime table does not reach far enough for the requested truncation.
    #[error("prime table too small: need limit >= {required}, table has {limit}")]
    TableTooSmall { required: u64, limit: u64 },

    /// Trial division left a cofactor that cannot be certified prime.
    #[error("incomplete factorization of {n}: cofactor {cofactor} exceeds limit^2; raise the table limit")]
    IncompleteFactorization { n: u64, cofactor: u64 },

    /// The denominator series vanishes, so the ratio is undefined.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// The base tuple is non-admissible, so the neighbor average is undefined.
    #[error("undefined average: {0}")]
    UndefinedAverage(String),

    /// A text format (tuple, CSV row) failed to parse.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
