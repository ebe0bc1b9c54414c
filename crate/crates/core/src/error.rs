use thiserror::Error;

/// Errors raised by the library. Each variant names the operation that
/// failed so the runner can report it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: invalid parameter: {msg}")]
    InvalidParameter { op: &'static str, msg: String },

    #[error("{op}: size mismatch (expected {expected}, got {got})")]
    SizeMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{op}: fields do not share one basis")]
    BasisMismatch { op: &'static str },

    #[error("{op}: fixed-point iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{op}: non-finite value at grid index {index}")]
    NonFinite { op: &'static str, index: usize },

    #[error("{op}: sample {index} is not strictly positive ({value:e})")]
    NonPositiveSample {
        op: &'static str,
        index: usize,
        value: f64,
    },

    #[error("at t = {t}: {source}")]
    AtTime { t: f64, source: Box<Error> },

    #[error("configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter {
            op,
            msg: msg.into(),
        }
    }

    /// Strips any `AtTime` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerics (non-convergence, overflow) as
    /// opposed to bad input or IO.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NonConvergence { .. } | Error::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
