use std::path::PathBuf;

use thiserror::Error;

use crate::fxp::QFormat;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFinite,

    #[error("invalid Q format: {total_bits} total bits, {frac_bits} fractional bits")]
    InvalidFormat { total_bits: u32, frac_bits: u32 },

    #[error("format mismatch: {0} vs {1}")]
    FormatMismatch(QFormat, QFormat),

    #[error("invalid LUT: {0}")]
    InvalidLut(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty vector")]
    EmptyVector,

    #[error("label vector is not one-hot")]
    NotOneHot,

    #[error("invalid network config: {0}")]
    InvalidConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config key `{key}`: {msg}")]
    ConfigKey { key: String, msg: String },

    #[error("bad {kind} file: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
