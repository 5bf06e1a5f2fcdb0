//! Text-side front end: the phoneme and pause inventory, context labels
//! and their learned embeddings, corpus manifests, length filtering and a
//! deterministic synthetic corpus.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod inventory;
pub mod labels;
pub mod synth;

pub use corpus::{filter_utterances, CorpusManifest, FilterOutcome, Partition, Utterance};
pub use embedding::{embed_context, ContextEmbedder, ContextEmbeddingDims, ContextMode};
pub use error::{FrontendError, Result};
pub use inventory::{tokenize_transcript, PhonemeClass, PhonemeId, PhonemeInventory, NUM_SYMBOLS, PAU, QSIL, SIL};
pub use labels::{ContextLabels, LabelField};
pub use synth::{
    generate_synthetic_corpus, generate_synthetic_corpus_with, render_utterance, voice_params, SyntheticCorpus,
    SyntheticCorpusConfig, VoiceParams,
};
