use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),

    #[error("sparse depth has no valid seed pixel")]
    NoSeeds,

    #[error("no scale-correction evidence (empty point set or zero total baseline)")]
    NoCorrectionEvidence,

    #[error("too few associated poses: {found} (need at least {required})")]
    TooFewAssociations { found: usize, required: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("keyframe {index}: {source}")]
    Keyframe {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by the numbers rather than by malformed input
    /// (degenerate geometry, missing evidence, too little data).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::BehindCamera(_)
            | Error::NoSeeds
            | Error::NoCorrectionEvidence
            | Error::TooFewAssociations { .. }
            | Error::Numerical(_) => true,
            Error::Keyframe { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
