use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gaze2class_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: file has no data rows", path.display())]
    EmptyFile { path: PathBuf },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// 2 for usage and configuration problems, 4 for numeric failures during
    /// training, 3 for everything wrong with the data.
    pub fn exit_code(&self) -> i32 {
        use gaze2class_core::Error as Core;
        match self {
            Error::Usage(_) => 2,
            Error::Core(e) => match e.root() {
                Core::Config(_) => 2,
                Core::Divergence(_) => 4,
                _ => 3,
            },
            Error::Io { .. } | Error::Parse { .. } | Error::Format { .. } | Error::EmptyFile { .. } => 3,
        }
    }
}
