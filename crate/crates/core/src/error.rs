use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KfpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis size overflow for d={d}, m={m}")]
    BasisOverflow { d: usize, m: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("time step {dt:e} exceeds the CFL bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("non-finite value at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("non-finite sample of {what} at node {node:?}")]
    NonFiniteSample { what: &'static str, node: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, KfpError>;

impl KfpError {
    /// True for failures that come from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, KfpError::NonFinite { .. } | KfpError::NonFiniteSample { .. })
    }
}
