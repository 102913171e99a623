use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("index {index} needs {required} points of history but only {available} precede it")]
    InsufficientHistory {
        index: usize,
        required: usize,
        available: usize,
    },

    #[error("index out of range: {0}")]
    IndexRange(String),

    #[error("integration produced a non-finite state at step {step}")]
    Overflow { step: usize },

    #[error("coordinate {coordinate} is identically zero over the training indices; its support radius would be 0")]
    ZeroRadius { coordinate: usize },
}

pub(crate) fn check_len(actual: usize, expected: usize, context: &'static str) -> Result<()> {
    if actual == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        })
    }
}
