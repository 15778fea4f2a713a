//! Batch front end for the classifier library: run configs, the train /
//! predict / eval / ablate commands, model persistence, and report output.

pub mod commands;
pub mod config;
pub mod model_io;
pub mod report;

use std::path::Path;

/// Error type carrying the process exit code: 1 for usage and configuration
/// problems, 2 for data problems, 3 for numeric failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] ssrgr::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => match e {
                ssrgr::Error::InvalidConfig(_) => 1,
                ssrgr::Error::NonFinite(_) | ssrgr::Error::IndefiniteLaplacian { .. } => 3,
                _ => 2,
            },
        }
    }
}

/// Writes through a sibling temp file and renames it into place, so an
/// interrupted run never leaves a half-written output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(ssrgr::Error::from)?;
    std::fs::rename(&tmp, path).map_err(ssrgr::Error::from)?;
    Ok(())
}
