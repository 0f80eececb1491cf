use std::path::PathBuf;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("alignment undefined: {0}")]
    AlignmentUndefined(String),
    #[error("phase-amplitude coupling undefined: {0}")]
    PacUndefined(String),
    #[error("correlation undefined: {0}")]
    CorrelationUndefined(String),
    #[error("stoi undefined: every frame is degenerate")]
    StoiUndefined,
    #[error("hnr undefined: no voiced frames")]
    HnrUndefined,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("malformed file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("held-out artifact {} read while training on other folds", .0.display())]
    HeldOutAccess(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True for configuration problems detected before any computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
