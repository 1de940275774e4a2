use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs outside an operation's domain, including shape mismatches.
    #[error("domain error: {0}")]
    Domain(String),
    /// Non-finite values or a failed factorization.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("container format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(format!($($arg)*)) };
}

macro_rules! numeric {
    ($($arg:tt)*) => { $crate::error::Error::Numeric(format!($($arg)*)) };
}

pub(crate) use domain;
pub(crate) use numeric;
