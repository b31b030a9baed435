use std::io;

/// Errors produced by histogram construction, filling, and dataset IO.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid axis definition (zero bins, inverted range, bad edges).
    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    /// Invalid histogram or run configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Invalid data fed to a fill or reduction (non-finite value, shape mismatch).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two histograms that were supposed to be merged do not have the same shape.
    #[error("incompatible histograms: {0}")]
    Incompatible(String),

    /// Statistics requested from an accumulator that never saw an in-range entry.
    #[error("no in-range entries accumulated")]
    EmptyStats,

    /// A requested column does not exist in the dataset or bulk.
    #[error("unknown column: {0}")]
    UnknownColumn(String),

    /// A column file or manifest is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Misuse of the phase timer (nested timing of the same category).
    #[error("phase {0} is already being timed")]
    PhaseActive(&'static str),

    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn invalid_axis(msg: impl Into<String>) -> Self {
        Error::InvalidAxis(msg.into())
    }

    pub(crate) fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
