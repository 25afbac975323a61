use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::contextgen::ContextError;
use crate::docbreak::BreakError;
use crate::reconstruct::ReconstructError;
use crate::record::RecordError;
use crate::sentfilter::FilterConfigError;
use crate::slide::ScoreError;

/// Any failure of a pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Break(#[from] BreakError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    FilterConfig(#[from] FilterConfigError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the failure came from the external scoring service rather
    /// than from the data or configuration.
    pub fn is_external(&self) -> bool {
        matches!(
            self,
            Error::Score(ScoreError::Backend { .. } | ScoreError::Protocol { .. })
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
