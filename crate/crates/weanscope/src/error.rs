use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("missing upstream artifact {0}; run the earlier stage first")]
    MissingUpstreamArtifact(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("model file version {found} is newer than supported version {supported}")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("model file checksum mismatch: {0}")]
    ChecksumMismatch(String),
    #[error(transparent)]
    Core(#[from] weanscope_core::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        PipelineError::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::ConfigInvalid(_) => 2,
            PipelineError::MissingUpstreamArtifact(_) => 3,
            PipelineError::Io { .. } => 4,
            PipelineError::Format { .. } => 5,
            PipelineError::VersionMismatch { .. } => 6,
            PipelineError::ChecksumMismatch(_) => 7,
            PipelineError::Core(_) => 8,
        }
    }
}
