use lcp_autodiff::AutodiffError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LcpError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("series too short: need at least {needed} samples, got {got}")]
    ShortSeries { needed: usize, got: usize },
    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("every sampled pair of states was degenerate")]
    DegeneratePairs,
    #[error("checkpoint was trained for environment {expected}, requested {got}")]
    EnvMismatch { expected: String, got: String },
}

impl LcpError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LcpError>;
