use thiserror::Error;

/// Errors raised by the simulators and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, mismatched dimensions, or an ill-posed request.
    #[error("configuration error: {0}")]
    Config(String),

    /// A rate, state or coefficient became non-finite, or a storage cap was hit.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A replica of an ensemble failed.
    #[error("replica {index} failed: {source}")]
    Replica {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for configuration problems (as opposed to runtime failures),
    /// looking through replica wrappers.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Numeric(_) => false,
            Error::Replica { source, .. } => source.is_config(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
