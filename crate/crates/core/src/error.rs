use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{0}: table has no entries")]
    EmptyTable(String),

    #[error("unknown symbol {symbol:?} (U+{codepoint:04X}) at offset {offset} in {form:?}")]
    UnknownSymbol {
        form: String,
        symbol: char,
        codepoint: u32,
        offset: usize,
    },

    #[error("no ASJP mapping for segment {0:?}")]
    UnmappedSegment(String),

    #[error("form {id:?} is empty after separator cleanup")]
    EmptyForm { id: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tape was recorded against parameter version {recorded}, parameters are now at version {current}")]
    StaleTape { recorded: u64, current: u64 },

    #[error("non-finite gradient in {tensor} at index {index}: {value}")]
    NonFiniteGradient {
        tensor: String,
        index: usize,
        value: f64,
    },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("samples have zero variance")]
    ZeroVariance,

    #[error("degenerate mixture: component means are equal ({0})")]
    EqualMeans(f64),

    #[error("unknown form id {0:?}")]
    UnknownId(String),

    #[error("no threshold for language {0:?}")]
    MissingThreshold(String),

    #[error("missing gold annotation: {0}")]
    MissingGold(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
