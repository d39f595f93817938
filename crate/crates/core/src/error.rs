use std::path::PathBuf;

use crate::calibration::MetricKey;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("profile has no normalization entry for metric `{0}`")]
    MissingNormalization(MetricKey),

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: at `{field}`: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },

    #[error("validation failed for {path}: {}", .problems.join("; "))]
    Validation { path: PathBuf, problems: Vec<String> },

    #[error("cannot decode image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("cannot read depth map {path}: {message}")]
    Depth { path: PathBuf, message: String },

    #[error("{failed} of {total} images failed (limit {limit:.1}%)", limit = .max_fraction * 100.0)]
    TooManyFailures {
        failed: usize,
        total: usize,
        max_fraction: f64,
    },

    /// A category cannot be scored for this image; the pipeline records
    /// `reason` as the unlabeled reason instead of failing the image.
    #[error("excluded ({reason}): {detail}")]
    Excluded { reason: &'static str, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        err: serde_path_to_error::Error<serde_json::Error>,
    ) -> Self {
        let field = err.path().to_string();
        let inner = err.into_inner();
        Error::Parse {
            path: path.into(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    }

    pub(crate) fn validation(path: impl Into<PathBuf>, problems: Vec<String>) -> Self {
        Error::Validation {
            path: path.into(),
            problems,
        }
    }
}
