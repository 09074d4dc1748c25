use thiserror::Error;

use crate::lp::LpStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid demand: {0}")]
    InvalidDemand(String),
    #[error("placement is not popularity-first")]
    NotPopularityFirst,
    #[error("instance too large for exact evaluation: {0}")]
    TooLarge(String),
    #[error("{users} users exceed {files} files; all-distinct demands are impossible")]
    MoreUsersThanFiles { users: usize, files: usize },
    #[error("operation requires uniform file sizes")]
    NonuniformSizes,
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("linear program ended with status {0:?}")]
    Lp(LpStatus),
}

impl Error {
    /// True for errors raised by the enumeration size guards.
    pub fn is_size_guard(&self) -> bool {
        matches!(self, Error::TooLarge(_))
    }
}
