use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter vector or geometric configuration falls outside what the manifold supports.
    #[error("domain error: {0}")]
    Domain(String),
    /// Caller-side misuse: mismatched sizes, empty inputs, infeasible budgets.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
