use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input: bad files, bad parameters, violated preconditions.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("channel count mismatch: metadata declares {expected} channels, data has {found}")]
    ChannelCountMismatch { expected: usize, found: usize },

    #[error("non-numeric value {value:?} at row {row}, column {col}")]
    NonNumeric { row: usize, col: usize, value: String },

    #[error("recording too short to trim: {duration_s} s available, {needed_s} s required")]
    TooShortToTrim { duration_s: f64, needed_s: f64 },

    #[error("rejected epoch cannot be analysed")]
    RejectedEpoch,

    #[error("no frequency bins in band {band} at resolution {resolution_hz} Hz")]
    EmptyBand { band: String, resolution_hz: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("too many rejected epochs in {condition}: {rejected} of {total}")]
    ExcessiveRejection {
        condition: String,
        rejected: usize,
        total: usize,
    },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error stems from bad user input (as opposed to a failure while running).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::ExcessiveRejection { .. })
    }
}
