use lcp_core::LcpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) | Self::Failed(_) => 1,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}

impl From<LcpError> for CliError {
    fn from(e: LcpError) -> Self {
        match e {
            LcpError::Invalid { .. }
            | LcpError::Dimension { .. }
            | LcpError::EnvMismatch { .. } => Self::Config(e.to_string()),
            LcpError::NonFinite(_) | LcpError::Autodiff(_) | LcpError::DegeneratePairs => {
                Self::Numerical(e.to_string())
            }
            LcpError::EpisodeDone | LcpError::ShortSeries { .. } | LcpError::LengthMismatch(..) => {
                Self::Failed(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
