//! Reverse-mode automatic differentiation for the rakugo TTS models.
//!
//! A [`Graph`] records one forward pass over row-major `f64` matrices and
//! replays it backwards. Parameters persist in a [`ParamStore`]; layers in
//! [`layers`] hold only ids into it, so a model can be evaluated on many
//! graphs at once (one per utterance) and the gradients merged in order.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod par;
pub mod params;
pub mod tensor;

pub use error::{AutodiffError, Result};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{Conv2dGeometry, Graph, Mode, Var};
pub use optim::{adam_update, AdamConfig, AdamState};
pub use par::{map_indexed, Parallelism};
pub use params::{BatchStatUpdate, Gradients, Param, ParamId, ParamKind, ParamStore};
pub use tensor::Tensor;
