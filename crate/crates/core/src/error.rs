use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("genotype length mismatch: expected {expected}, got {got}")]
    GenotypeLength { expected: usize, got: usize },

    #[error("sensory shape mismatch: expected {expected_channels}x{expected_steps}, got {channels}x{steps}")]
    SensoryShape {
        expected_channels: usize,
        expected_steps: usize,
        channels: usize,
        steps: usize,
    },

    #[error("container is empty")]
    EmptyContainer,

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("unknown variant `{0}`")]
    UnknownVariant(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed csv {path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
