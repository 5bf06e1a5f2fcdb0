//! Training loop, checkpoints, story synthesis and evaluation glue for the
//! rakugo TTS models.

pub mod acoustics;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod listening;
pub mod model;
pub mod story;
pub mod train;

pub use acoustics::measure_directory;
pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, Checkpoint};
pub use config::TrainConfig;
pub use data::{Dataset, Example};
pub use error::{PipelineError, Result};
pub use listening::SimulatedListening;
pub use model::{fingerprint, Style, TrainedModel};
pub use story::{read_pauses, synthesize_story, StoryAudio, StoryOptions};
pub use train::{evaluate, train, EpochRecord, LossHistory, TrainOutcome, TrainState, Trainer};
