use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] lmg_core::Error),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 configuration, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(lmg_core::Error::Io(_) | lmg_core::Error::CacheFormat { .. }) => 3,
            CliError::Numerical(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}
