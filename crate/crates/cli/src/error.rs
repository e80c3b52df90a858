use std::io;

use thiserror::Error;

/// Process exit status: success.
pub const EXIT_OK: u8 = 0;
/// Process exit status: a statistical check ran and failed.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// Process exit status: bad flags, bad config or invalid model input.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] treedim_core::Error),
    #[error("{0} (raise --size or lower --level)")]
    InsufficientGrowth(treedim_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        EXIT_USAGE
    }
}

pub(crate) fn missing(flag: &str) -> CliError {
    CliError::Usage(format!("missing required flag --{flag}"))
}
