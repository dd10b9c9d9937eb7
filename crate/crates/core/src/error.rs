use std::fmt;
use std::io;

/// Errors raised by every stage of the pipeline.
#[derive(Debug)]
pub enum Error {
    /// A value fell outside the domain an operation accepts.
    Domain(String),
    /// A phoneme symbol is not part of the alphabet.
    UnknownSymbol(String),
    /// Invalid or inconsistent configuration.
    Config(String),
    /// Malformed binary file.
    Format { offset: u64, message: String },
    /// Tensor or sequence shapes do not agree.
    Dimension(String),
    /// A NaN or infinity showed up during a computation.
    Numeric(String),
    /// An operation was called on an object in the wrong state.
    State(String),
    /// Evaluation could not produce a score.
    Evaluation(String),
    /// Generation produced a non-finite value.
    Generation { frame: usize, message: String },
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// True for errors caused by user-supplied configuration rather than by
    /// the computation itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::UnknownSymbol(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::UnknownSymbol(s) => write!(f, "unknown phoneme symbol '{s}'"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Format { offset, message } => {
                write!(f, "format error at byte {offset}: {message}")
            }
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::State(m) => write!(f, "state error: {m}"),
            Error::Evaluation(m) => write!(f, "evaluation error: {m}"),
            Error::Generation { frame, message } => {
                write!(f, "generation error at frame {frame}: {message}")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
