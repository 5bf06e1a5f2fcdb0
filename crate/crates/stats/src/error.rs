use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("record {index}: score {value} is not an integer MOS in 1..=5")]
    InvalidScore { index: usize, value: f64 },
    #[error("record {index}: non-finite score")]
    NonFiniteScore { index: usize },
    #[error("duplicate answer from listener {listener} for story {story}, {question}")]
    DuplicateRecord { listener: String, story: String, question: String },
    #[error("unknown question {0:?} (expected Q1..Q4)")]
    UnknownQuestion(String),
    #[error("listener {0} gave identical scores to every question; z-score undefined")]
    ZeroListenerVariance(String),
    #[error("no {reference} scores for story {story}, {question}")]
    MissingReference { reference: String, story: String, question: String },
    #[error("{reference} scores for story {story}, {question} have zero variance")]
    ZeroReferenceVariance { reference: String, story: String, question: String },
    #[error("rank variance is zero in both samples; statistic undefined")]
    DegenerateRanks,
    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },
    #[error("length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Dsp(#[from] rakugo_dsp::DspError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StatsError>;
