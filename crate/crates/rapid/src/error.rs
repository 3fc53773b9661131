use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::pnm::PnmError;
use crate::rlbl::RlblError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Pnm { path: PathBuf, source: PnmError },
    #[error("{path}: {source}")]
    Rlbl { path: PathBuf, source: RlblError },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] rapid_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 2 configuration, 3 input/output, 4 integrity.
    pub fn exit_code(&self) -> u8 {
        use rapid_core::Error as Core;
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Pnm { .. } | Error::Rlbl { .. } | Error::Parse { .. } => 3,
            Error::Core(e) => match e {
                Core::Config(_) | Core::Init(_) | Core::Input(_) => 2,
                Core::Image(_) | Core::Dimension(_) | Core::Mapping(_) => 3,
                Core::Integrity(_) | Core::Contract(_) => 4,
            },
        }
    }
}
