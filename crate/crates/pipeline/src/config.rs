//! Training configuration, read from a TOML file.
//!
//! ```toml
//! batch_size = 8         # utterances per optimizer step
//! learning_rate = 0.001  # initial Adam step size
//! lr_decay = 0.98        # multiplied into the step size after every epoch
//! lr_floor = 1e-5        # decay stops here
//! epochs = 300
//! seed = 1
//! scale = 0.125          # layer-width factor in (0, 1]
//! l2_weight = 1e-6
//! clip_norm = 1.0        # global gradient-norm clip, 0 disables
//! parallel = true        # per-utterance gradients on the rayon pool
//! keep_best = false      # return the parameters of the best validation epoch
//! ```
//!
//! Missing keys take the desk defaults.

use std::path::Path;

use rakugo_autodiff::Parallelism;
use rakugo_model::{ModelDims, DEFAULT_L2_WEIGHT};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub lr_floor: f64,
    pub epochs: usize,
    pub seed: u64,
    pub scale: f64,
    pub l2_weight: f64,
    pub clip_norm: f64,
    pub parallel: bool,
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// Small enough to train on one desktop core.
    pub fn desk() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 1e-3,
            lr_decay: 0.98,
            lr_floor: 1e-5,
            epochs: 300,
            seed: 1,
            scale: 1.0 / 8.0,
            l2_weight: DEFAULT_L2_WEIGHT,
            clip_norm: 1.0,
            parallel: true,
            keep_best: false,
        }
    }

    /// Full-width network, batch 128, about 2,000 epochs.
    pub fn paper() -> Self {
        Self { batch_size: 128, epochs: 2000, scale: 1.0, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return bad(format!("scale {} outside (0, 1]", self.scale));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {}", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay {} outside (0, 1]", self.lr_decay));
        }
        if !(self.lr_floor >= 0.0) || !(self.l2_weight >= 0.0) || !(self.clip_norm >= 0.0) {
            return bad("lr_floor, l2_weight and clip_norm must be non-negative".into());
        }
        Ok(())
    }

    /// Step size for 0-based `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        (self.learning_rate * self.lr_decay.powi(epoch as i32)).max(self.lr_floor)
    }

    pub fn dims(&self) -> Result<ModelDims> {
        Ok(ModelDims::scaled(self.scale)?)
    }

    pub fn parallelism(&self) -> Parallelism {
        if self.parallel {
            Parallelism::Rayon
        } else {
            Parallelism::Sequential
        }
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg = Self::from_toml(&text).map_err(|source| PipelineError::ConfigParse { path: path.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
