use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] groundlab_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("archive {path}: {message}")]
    Archive { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn archive(path: &Path, message: impl Into<String>) -> Self {
        Error::Archive {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for violated
    /// runtime invariants, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use groundlab_core::Error as E;
        match self {
            Error::Config(_) | Error::Core(E::Config(_)) => 2,
            Error::Core(E::Invariant(_) | E::Routing { .. }) => 3,
            _ => 1,
        }
    }
}
