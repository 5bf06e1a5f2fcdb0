use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("unknown symbol `{symbol}` at position {position}")]
    UnknownSymbol { symbol: String, position: usize },
    #[error("unknown context field `{0}`")]
    UnknownField(String),
    #[error("`{value}` is not a legal value of {field}")]
    UnknownLabel { field: &'static str, value: String },
    #[error("utterance {id}: {reason}")]
    InvalidUtterance { id: String, reason: String },
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("utterance `{0}` has no partition assignment")]
    Unassigned(String),
    #[error("partition file names unknown utterance `{0}`")]
    UnknownUtterance(String),
    #[error("no duration for utterance `{0}`")]
    MissingDuration(String),
    #[error("audio file {0} does not exist")]
    MissingAudio(PathBuf),
    #[error("invalid corpus request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Autodiff(#[from] rakugo_autodiff::AutodiffError),
    #[error(transparent)]
    Dsp(#[from] rakugo_dsp::DspError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FrontendError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> FrontendError {
    let path = path.into();
    move |source| FrontendError::Io { path, source }
}
