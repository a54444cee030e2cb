use thiserror::Error;

/// Errors produced by matrix arithmetic, solvers, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("{op}: dimension mismatch between {left_rows}x{left_cols} and {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    /// Input contained a NaN or infinite value.
    #[error("{context}: non-finite value encountered")]
    NonFinite { context: &'static str },

    /// A parameter was outside its legal range.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// A denominator fell below machine tolerance where the algorithm
    /// requires it to be strictly positive.
    #[error("numeric degeneracy in {context}: {message}")]
    NumericDegeneracy {
        context: &'static str,
        message: String,
    },

    /// Internal state violated an invariant that should be structurally
    /// impossible; signals state corruption rather than bad input.
    #[error("internal consistency failure in {context}: {message}")]
    InternalConsistency {
        context: &'static str,
        message: String,
    },

    /// A data file could not be parsed. `position` is a byte offset for
    /// binary formats and a 1-based line number for text formats.
    #[error("parse error in {path} at {unit} {position}: {message}")]
    Parse {
        path: String,
        unit: &'static str,
        position: u64,
        message: String,
    },

    /// Snapshot payload was malformed or carried an unsupported version.
    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    ) -> Self {
        Error::DimensionMismatch {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
