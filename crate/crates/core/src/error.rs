use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point index {index} out of range for a space of {len} points")]
    UnknownPoint { index: usize, len: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("geodesic interpolation is not available for {0} spaces")]
    NoInterpolation(&'static str),
    #[error("antipodal points have no unique geodesic")]
    Antipodal,
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("class membership not certified: {0}")]
    Membership(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
