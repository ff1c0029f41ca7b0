use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("no minimum redundancy array cataloged for {0} elements (supported: 2..=8)")]
    UnsupportedSize(usize),

    #[error("azimuth {0} deg outside [-90, 90]")]
    AzimuthOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pattern table row {row}: {message}")]
    PatternTable { row: usize, message: String },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("cannot estimate {sources} sources with {dimension} (virtual) sensors")]
    Rank { sources: usize, dimension: usize },

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("length mismatch: {0} estimates vs {1} true angles")]
    LengthMismatch(usize, usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed results file: {0}")]
    Results(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by the user's configuration rather than by a
    /// failed computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidGeometry(_)
                | Error::UnsupportedSize(_)
                | Error::InvalidParameter(_)
                | Error::PatternTable { .. }
                | Error::UnsupportedGeometry(_)
                | Error::Rank { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
