use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ring schedule: {0}")]
    Schedule(String),

    #[error("radius ratio {value} at index {index} outside (1, {upper})")]
    RatioOutOfRange { index: usize, value: f64, upper: f64 },

    #[error("grid search over {rings} rings not supported (at most {max})")]
    TooManyRings { rings: usize, max: usize },

    #[error("element alphabet {alphabet:?} has duplicate entries; need N >= {min_n}")]
    DuplicateAlphabet { alphabet: Vec<usize>, min_n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("hypothesis not in bit map: {0}")]
    UnknownHypothesis(String),

    #[error("mode mismatch: {0}")]
    Mode(String),

    #[error("series did not converge after {terms} terms")]
    SeriesDivergence { terms: usize },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("SDP solver stopped after {iterations} iterations (primal {primal:.3e}, dual {dual:.3e})")]
    SolverNonConvergence { iterations: usize, primal: f64, dual: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
