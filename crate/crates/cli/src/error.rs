use std::fmt;

use semigap_core::Error;

/// Everything that ends a run early, each mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or arguments.
    Usage(String),
    /// The backend could not be built.
    Construction(Error),
    /// A computation on a built backend failed.
    Runtime(Error),
    Io(std::io::Error),
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_NON_ERGODIC: u8 = 2;
pub const EXIT_FAILURE: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Construction(Error::NonErgodic { .. })
            | CliError::Runtime(Error::NonErgodic { .. }) => EXIT_NON_ERGODIC,
            CliError::Construction(_) | CliError::Runtime(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Construction(e) => write!(f, "cannot build backend: {e}"),
            CliError::Runtime(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
