use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("no embedded t-design with {0} points (available: 56, 60)")]
    UnknownTDesign(usize),

    #[error("cannot merge an empty list of clouds")]
    EmptyMerge,

    #[error("degenerate layout: {0}; add virtual fill speakers to close the hull")]
    DegenerateLayout(String),

    #[error(
        "direction (az {azimuth:.3}, el {elevation:.3}) is outside the panning coverage; \
         nearest covered direction is (az {nearest_azimuth:.3}, el {nearest_elevation:.3})"
    )]
    OutsideCoverage { azimuth: f64, elevation: f64, nearest_azimuth: f64, nearest_elevation: f64 },

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed matrix file: {0}")]
    MatrixFile(String),

    #[error("audio error: {0}")]
    Audio(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::OutsideCoverage { .. } => 3,
            _ => 2,
        }
    }
}
