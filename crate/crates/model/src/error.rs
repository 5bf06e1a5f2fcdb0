use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected width {expected}, got {actual}")]
    DimMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("content distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("invalid style-token weights: {0}")]
    InvalidStyleWeights(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("{0} is required by this model variant")]
    MissingInput(&'static str),
    #[error("{0} is not used by this model variant")]
    UnexpectedInput(&'static str),
    #[error("unknown model variant `{0}`")]
    UnknownVariant(String),
    #[error(transparent)]
    Autodiff(#[from] rakugo_autodiff::AutodiffError),
    #[error(transparent)]
    Frontend(#[from] rakugo_frontend::FrontendError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
