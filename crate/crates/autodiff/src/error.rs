use thiserror::Error;

use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch between {lhs} and {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Shape,
        rhs: Shape,
    },
    #[error("{op}: invalid input: {reason}")]
    InvalidInput { op: &'static str, reason: String },
    #[error("{op}: expected {expected} inputs, got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("backward root must be scalar, got {0}")]
    NonScalarRoot(Shape),
    #[error("value #{0} does not require grad and cannot be a differentiation target")]
    NotDifferentiable(usize),
    #[error("values belong to different graphs")]
    ForeignValue,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, AutodiffError>;
