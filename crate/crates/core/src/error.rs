use thiserror::Error;

use crate::source::Party;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A source has no one- or two-photon component, so the decoy ratios are undefined.
    #[error("degenerate source: probability of {photons} photon(s) is zero")]
    DegenerateSource { photons: usize },

    #[error("decoy condition violated for party {party} at photon number {k}")]
    DecoyCondition { party: Party, k: usize },

    #[error("degenerate decoy setting: bound denominator is {denominator:e}")]
    DegenerateDecoy { denominator: f64 },

    #[error("incomplete gain data: missing {0}")]
    IncompleteData(String),

    #[error("malformed gain data at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("undefined bound: single-photon-pair yield lower bound is zero")]
    UndefinedBound,
}

pub type Result<T> = std::result::Result<T, Error>;
