use thiserror::Error;

/// Errors raised while building or differentiating a computation record.
#[derive(Debug, Error)]
pub enum GradError {
    #[error("shape mismatch in {op}: lhs {lhs:?} vs rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op} expects {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("chunk size {chunk} does not divide trailing dimension {dim}")]
    BadChunk { chunk: usize, dim: usize },
    #[error("empty input to {op}")]
    EmptyInput { op: &'static str },
    #[error("parameter {0:?} already registered")]
    DuplicateParam(String),
}
