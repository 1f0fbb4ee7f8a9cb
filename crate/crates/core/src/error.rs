use std::path::PathBuf;

use crate::bon::EvalError;
use crate::curation::BlendError;
use crate::gateway::GatewayError;
use crate::pairs::SampleError;
use crate::reward::TrainError;

/// Top-level error for file-driven stages and the command line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Blend(#[from] BlendError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Blend(_) => 2,
            Error::Io { .. } => 3,
            Error::Malformed { .. } | Error::Data(_) | Error::Sample(_) => 4,
            Error::Gateway(_) => 5,
            Error::Train(_) => 6,
            Error::Eval(_) => 7,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
