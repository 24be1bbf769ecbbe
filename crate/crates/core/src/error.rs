use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    /// The conditioning distribution assigns (numerically) zero mass to the state.
    #[error("state {0} is unreachable under the conditioning distribution")]
    Unreachable(u32),
    /// No dataset item can have produced the observed corrupted state.
    #[error("observed state has zero likelihood under every dataset item")]
    Inconsistent,
    #[error("invalid generator: {0}")]
    InvalidGenerator(&'static str),
}

pub(crate) fn ensure(cond: bool, msg: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg))
    }
}

pub(crate) fn ensure_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
