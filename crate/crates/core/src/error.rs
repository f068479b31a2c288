use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the core pipeline.
///
/// The variants line up with the stable CLI exit codes: `Config` and
/// `Shape` are configuration/shape problems, `Validation` is bad input data,
/// `EmptyData` means nothing survived a stage, `Diverged` aborts training.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent model or pipeline configuration.
    Config(String),
    /// Input data violates a documented invariant.
    Validation(String),
    /// A tensor or feature block does not have the expected shape.
    Shape {
        what: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    /// Nothing left to work on.
    EmptyData(String),
    /// Training produced a non-finite loss.
    Diverged { epoch: usize, learning_rate: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(what: impl Into<String>, expected: &[usize], actual: &[usize]) -> Self {
        Error::Shape {
            what: what.into(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Shape {
                what,
                expected,
                actual,
            } => write!(
                f,
                "shape mismatch for {what}: expected {expected:?}, got {actual:?}"
            ),
            Error::EmptyData(msg) => write!(f, "no data: {msg}"),
            Error::Diverged {
                epoch,
                learning_rate,
            } => write!(
                f,
                "training diverged (non-finite loss) at epoch {epoch} with learning rate {learning_rate}"
            ),
        }
    }
}

impl core::error::Error for Error {}
