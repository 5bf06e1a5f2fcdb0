//! Signal processing for the rakugo TTS pipeline: log-mel analysis,
//! Griffin-Lim resynthesis, active-level normalisation and the acoustic
//! statistics (pitch and speaking-rate variation) used in evaluation.

pub mod error;
pub mod f0;
pub mod griffin_lim;
pub mod level;
pub mod mel;
pub mod rate;
pub mod stft;
pub mod wave;

pub use error::{DspError, Result};
pub use f0::{coefficient_of_variation, estimate_f0, f0_cov, F0Track};
pub use griffin_lim::{griffin_lim, GriffinLim, Reconstruction, DEFAULT_ITERATIONS};
pub use level::{active_level, level_normalize, TARGET_DBOV};
pub use mel::{mel_batch, mel_spectrogram, MelAnalyzer, MelConfig, MelSpectrogram, MelStats};
pub use rate::{count_morae, rate_cov, speech_rate};
pub use stft::{Stft, StftConfig};
pub use wave::Waveform;
