use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed input: a letter outside the alphabet, an unparsable file, ...
    #[error("input error: {0}")]
    Input(String),
    /// Arguments outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// An enumeration or matrix would exceed the configured cap.
    #[error("budget exceeded: {what} needs {requested} elements, cap is {cap}")]
    Budget {
        what: &'static str,
        requested: u128,
        cap: u128,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
