use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SesopError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("non-finite value encountered at point {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("empty search space")]
    EmptySearchSpace,

    #[error(
        "degenerate search direction: |w| = {residual_norm:e} relative to |d| = {direction_norm:e}"
    )]
    DegenerateDirection {
        residual_norm: f64,
        direction_norm: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<SesopError>,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl SesopError {
    pub(crate) fn at(self, iteration: usize) -> Self {
        SesopError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, SesopError>;
