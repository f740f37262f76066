use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FdbError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FdbError {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config parse error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("empty training set in {0}")]
    EmptyTrainingSet(PathBuf),

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

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl FdbError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        FdbError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the filesystem or by undecodable files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            FdbError::Io { .. } | FdbError::Image { .. } | FdbError::Csv(_) | FdbError::EmptyTrainingSet(_)
        )
    }
}
