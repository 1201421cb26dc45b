use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tacmap_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: malformed header: {msg}", path.display())]
    MalformedHeader { path: PathBuf, msg: String },
    #[error("{}: unsupported bit depth (maxval {maxval})", path.display())]
    UnsupportedDepth { path: PathBuf, maxval: u32 },
    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }
    pub(crate) fn parse(path: &Path, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.to_path_buf(), msg: msg.into() }
    }
    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        Error::Csv { path: path.to_path_buf(), source }
    }
}
