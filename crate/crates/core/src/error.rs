use thiserror::Error;

/// Errors produced by the extraction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("singular covariance (condition estimate {cond:.3e})")]
    SingularCovariance { cond: f64 },

    #[error("degenerate filter: output power {power:.3e} is not positive")]
    DegenerateFilter { power: f64 },

    #[error("degenerate Newton step in mixture {k}: |nu - rho| = {gap:.3e}")]
    DegenerateStep { k: usize, gap: f64 },

    #[error("numerical failure in mixture {k}: {what}")]
    NumericalFailure { k: usize, what: String },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("frequency bin {bin}: {source}")]
    AtFrequency {
        bin: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Mixture index carried by step and numerical errors, if any.
    pub fn mixture_index(&self) -> Option<usize> {
        match self {
            Error::DegenerateStep { k, .. } | Error::NumericalFailure { k, .. } => Some(*k),
            Error::AtIteration { source, .. } => source.mixture_index(),
            _ => None,
        }
    }

    /// Strips iteration/frequency annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } | Error::AtFrequency { source, .. } => source.root(),
            e => e,
        }
    }
}
