//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("model has no designated aliased pair")]
    NotAliased,

    #[error("model is not minimal ({0}); analysis assumes minimality")]
    NotMinimal(String),

    #[error("beta must lie in [0, 1], got {0}")]
    InvalidBeta(f64),

    #[error("similarity parameters require tau_hi > tau_lo, got ({0}, {1})")]
    InvalidTau(f64, f64),

    #[error("emission parameters {0} and {1} coincide")]
    CoincidentEmissions(usize, usize),

    #[error("kernel matrix is not positive definite")]
    SingularKernel,

    #[error("sequence too short: length {len}, need at least {min}")]
    SequenceTooShort { len: usize, min: usize },

    #[error("second-moment deviation is zero; kappa is undefined")]
    UndefinedKappa,

    #[error("scale factor gamma must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("detection statistic is zero; nothing to estimate")]
    ZeroSignal,

    #[error("numerical underflow in forward pass at iteration {iteration}, step {step}")]
    Underflow { iteration: usize, step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (models, flags, configs)
    /// rather than by a failure at run time. The CLI maps these to exit
    /// code 2 and everything else to 3.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Underflow { .. } | Error::Io(_))
    }
}
