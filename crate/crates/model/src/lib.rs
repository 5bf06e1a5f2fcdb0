//! Acoustic models mapping phoneme sequences to log-mel spectrograms:
//! Tacotron-2 with forward attention and its self-attention extension,
//! each optionally conditioned on global style tokens and context labels.

pub mod attention;
pub mod config;
pub mod error;
pub mod gst;
pub mod loss;
pub mod tacotron;

pub use attention::{expected_position, forward_attention_step, initial_alignment, INITIAL_TRANSITION};
pub use config::{Backbone, Conditioning, ModelDims, ModelVariant};
pub use error::{ModelError, Result};
pub use gst::{check_heads, GlobalStyleTokens, StyleWeights};
pub use loss::{compute_loss, LossBreakdown, LossTerms, DEFAULT_L2_WEIGHT};
pub use tacotron::{DecoderOutput, Encoded, ModelInput, StyleSource, Synthesis, SynthesisOptions, Tacotron};
