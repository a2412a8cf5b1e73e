use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stratified split impossible: no samples of class {0}")]
    Stratification(&'static str),

    #[error("training diverged: non-finite gradient in tensor `{0}`")]
    Divergence(&'static str),

    #[error("activation cache does not belong to these parameters")]
    StaleCache,

    #[error("cell {cell}, stage {stage}: {source}")]
    Cell {
        cell: String,
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_cell(self, cell: &str, stage: &'static str) -> Self {
        Error::Cell {
            cell: cell.into(),
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping any grid-cell annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::Cell { source, .. } => source.root(),
            other => other,
        }
    }
}
