use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("unsupported sample rate {0} Hz (expected 16000 or 48000)")]
    UnsupportedSampleRate(u32),
    #[error("waveform contains a non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("input of {samples} samples is shorter than one {frame_length}-sample frame")]
    TooShort { samples: usize, frame_length: usize },
    #[error("signal is silent")]
    Silent,
    #[error("no voiced frames")]
    NoVoicedFrames,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("need at least one value")]
    Empty,
    #[error("mean is zero; coefficient of variation undefined")]
    ZeroMean,
    #[error("mel dimension mismatch: expected {expected}, got {actual}")]
    MelDims { expected: usize, actual: usize },
    #[error("malformed mel file: {0}")]
    BadMelFile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DspError>;
