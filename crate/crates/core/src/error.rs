use std::path::PathBuf;

use crate::checker::CheckError;
use crate::frontend::FrontendError;
use crate::interp::InterpError;
use crate::pds::PdsError;
use crate::security::SpecError;
use crate::selfcomp::ComposeError;
use crate::value::DomainError;

/// Any failure of a pipeline stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Pds(#[from] PdsError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

impl Error {
    /// Whether the failure is a resource limit rather than bad input.
    pub fn is_budget(&self) -> bool {
        let pds = |e: &PdsError| {
            matches!(
                e,
                PdsError::StateBudgetExceeded { .. } | PdsError::Diverged(_)
            )
        };
        match self {
            Error::Pds(e) => pds(e),
            Error::Compose(ComposeError::Pds(e)) => pds(e),
            Error::Interp(
                InterpError::EnumerationTooLarge { .. } | InterpError::CallDepthExceeded,
            ) => true,
            Error::Check(CheckError::InitialSetTooLarge { .. }) => true,
            Error::Check(CheckError::Pds(e) | CheckError::Compose(ComposeError::Pds(e))) => pds(e),
            _ => false,
        }
    }
}
