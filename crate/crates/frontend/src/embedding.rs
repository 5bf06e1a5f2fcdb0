use rakugo_autodiff::layers::{Embedding, ParamInit};
use rakugo_autodiff::{Graph, Mode, ParamStore, Var};

use crate::error::Result;
use crate::labels::{ContextLabels, LabelField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    /// Character attributes only: one joint table over
    /// (gender, age, social rank, individuality).
    Attr,
    /// Every field, one table each, concatenated.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextEmbeddingDims {
    pub attr: usize,
    /// Per-field widths in [`LabelField::ALL`] order.
    pub all: [usize; 9],
}

impl ContextEmbeddingDims {
    /// 4 for attributes; 68 for the full label set, split roughly by vocabulary size.
    pub const FULL: Self = Self { attr: 4, all: [4, 8, 12, 4, 24, 4, 4, 4, 4] };

    /// Every table one unit wide (attribute table two), for miniature models.
    pub const TINY: Self = Self { attr: 2, all: [1; 9] };

    pub fn width(&self, mode: ContextMode) -> usize {
        match mode {
            ContextMode::Attr => self.attr,
            ContextMode::All => self.all.iter().sum(),
        }
    }
}

/// Number of distinct attribute tuples.
pub fn attr_combinations() -> usize {
    LabelField::ATTR.iter().map(|f| f.cardinality()).product()
}

/// Mixed-radix index of the attribute tuple.
pub fn attr_index(labels: &ContextLabels) -> usize {
    LabelField::ATTR
        .iter()
        .fold(0, |acc, f| acc * f.cardinality() + labels.index(*f))
}

/// Learned lookup from context labels to a conditioning vector.
#[derive(Debug, Clone)]
pub struct ContextEmbedder {
    mode: ContextMode,
    tables: Vec<Embedding>,
}

impl ContextEmbedder {
    pub fn new(init: &mut ParamInit, name: &str, mode: ContextMode, dims: ContextEmbeddingDims) -> Result<Self> {
        let mut s = init.scope(name);
        let tables = match mode {
            ContextMode::Attr => vec![Embedding::new(&mut s, "attr", attr_combinations(), dims.attr)?],
            ContextMode::All => LabelField::ALL
                .iter()
                .zip(dims.all)
                .map(|(f, d)| Embedding::new(&mut s, f.key(), f.cardinality(), d))
                .collect::<rakugo_autodiff::Result<_>>()?,
        };
        Ok(Self { mode, tables })
    }

    pub fn mode(&self) -> ContextMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.tables.iter().map(|t| t.dim).sum()
    }

    /// `[1, dim]` row.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, labels: &ContextLabels) -> Result<Var> {
        match self.mode {
            ContextMode::Attr => Ok(self.tables[0].forward(g, store, &[attr_index(labels)])?),
            ContextMode::All => {
                let parts = LabelField::ALL
                    .iter()
                    .zip(&self.tables)
                    .map(|(f, t)| t.forward(g, store, &[labels.index(*f)]))
                    .collect::<rakugo_autodiff::Result<Vec<_>>>()?;
                Ok(g.concat_cols(&parts)?)
            }
        }
    }

    pub fn embed(&self, store: &ParamStore, labels: &ContextLabels) -> Result<Vec<f64>> {
        let mut g = Graph::new(Mode::Eval, 0);
        let v = self.forward(&mut g, store, labels)?;
        Ok(g.value(v).to_vec())
    }
}

/// Standalone embedding lookup with freshly initialised full-size tables.
pub fn embed_context(labels: &ContextLabels, mode: ContextMode, seed: u64) -> Result<Vec<f64>> {
    use rand::SeedableRng;
    let mut store = ParamStore::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let e = ContextEmbedder::new(&mut ParamInit::new(&mut store, &mut rng), "context", mode, ContextEmbeddingDims::FULL)?;
    e.embed(&store, labels)
}
