use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("config file {path}: {source}")]
    ConfigParse { path: PathBuf, source: toml::de::Error },
    #[error("corpus has no {0} utterances")]
    EmptyPartition(&'static str),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss} (utterance {utterance})")]
    Diverged { epoch: usize, batch: usize, loss: f64, utterance: String },
    #[error("checkpoint {path}: corrupt {section} section: {reason}")]
    CorruptCheckpoint { path: PathBuf, section: String, reason: String },
    #[error("checkpoint fingerprint {found} does not match the requested model {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("story needs {expected} pause durations, got {actual}")]
    PauseCount { expected: usize, actual: usize },
    #[error("{path}:{line}: {reason}")]
    PauseFile { path: PathBuf, line: usize, reason: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Model(#[from] rakugo_model::ModelError),
    #[error(transparent)]
    Autodiff(#[from] rakugo_autodiff::AutodiffError),
    #[error(transparent)]
    Dsp(#[from] rakugo_dsp::DspError),
    #[error(transparent)]
    Frontend(#[from] rakugo_frontend::FrontendError),
    #[error(transparent)]
    Stats(#[from] rakugo_stats::StatsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
    let path = path.into();
    move |source| PipelineError::Io { path, source }
}
