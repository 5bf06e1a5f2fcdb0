//! Layer primitives built on [`Graph`](crate::Graph) ops.
//!
//! Each layer owns only [`ParamId`](crate::ParamId)s; values live in the
//! [`ParamStore`](crate::ParamStore) it was registered into.

mod conv;
mod dense;
mod norm;
mod recurrent;

pub use conv::{Conv1d, Conv2d};
pub use dense::{Dense, Embedding};
pub use norm::BatchNorm;
pub use recurrent::{zoneout, BiLstm, Gru, Lstm, LstmState};

use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::params::{init, ParamId, ParamKind, ParamStore};
use crate::tensor::Tensor;

/// Registers freshly initialised parameters under a name prefix.
pub struct ParamInit<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a> ParamInit<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            store,
            rng,
            prefix: String::new(),
        }
    }

    /// Child initialiser whose names are prefixed with `name.`.
    pub fn scope(&mut self, name: &str) -> ParamInit<'_> {
        ParamInit {
            prefix: self.qualify(name),
            store: self.store,
            rng: self.rng,
        }
    }

    fn qualify(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn glorot(&mut self, name: &str, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Result<ParamId> {
        let n = shape.iter().product();
        let values = init::glorot_uniform(self.rng, fan_in, fan_out, n);
        self.store.add(self.qualify(name), ParamKind::Weight, Tensor::new(shape, values)?)
    }

    pub fn uniform(&mut self, name: &str, shape: Vec<usize>, limit: f64) -> Result<ParamId> {
        let n = shape.iter().product();
        let values = init::uniform(self.rng, n, limit);
        self.store.add(self.qualify(name), ParamKind::Weight, Tensor::new(shape, values)?)
    }

    pub fn constant(&mut self, name: &str, kind: ParamKind, shape: Vec<usize>, value: f64) -> Result<ParamId> {
        self.store.add(self.qualify(name), kind, Tensor::full(shape, value))
    }

    pub fn tensor(&mut self, name: &str, kind: ParamKind, tensor: Tensor) -> Result<ParamId> {
        self.store.add(self.qualify(name), kind, tensor)
    }
}
