use std::path::{Path, PathBuf};

use etcd_core::error::{DataError, EtsError, LmiError, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ets(#[from] EtsError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 2 infeasible design, 3 divergence, 4 file errors,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Lmi(LmiError::Infeasible { .. }) => 2,
            BenchError::Ets(EtsError::Overflow { .. }) | BenchError::Data(DataError::Overflow { .. }) => 3,
            BenchError::Io { .. } | BenchError::Parse { .. } => 4,
            _ => 1,
        }
    }
}
