use thiserror::Error;

/// Errors raised by mechanisms, learners and game harnesses.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The mechanism cannot accept this call in its current state (halted, exhausted).
    #[error("invalid state: {0}")]
    State(String),
    /// Calls arrived out of the required order.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// A participant broke its behavioral contract.
    #[error("contract violation at round {round}: {reason}")]
    Contract { round: usize, reason: String },
    /// Malformed input file or config.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub(crate) fn contract(round: usize, reason: impl Into<String>) -> Self {
        Error::Contract {
            round,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
