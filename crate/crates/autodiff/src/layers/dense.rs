use super::ParamInit;
use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamKind, ParamStore};

/// Fully connected layer, `y = x · W + b` with `W` stored as `[in, out]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(init: &mut ParamInit, name: &str, in_dim: usize, out_dim: usize, bias: bool) -> Result<Self> {
        let mut s = init.scope(name);
        let weight = s.glorot("weight", vec![in_dim, out_dim], in_dim, out_dim)?;
        let bias = if bias {
            Some(s.constant("bias", ParamKind::Bias, vec![out_dim], 0.0)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(store, b);
                g.add(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Lookup table of `count` learned vectors.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub count: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(init: &mut ParamInit, name: &str, count: usize, dim: usize) -> Result<Self> {
        let table = init.scope(name).glorot("table", vec![count, dim], count, dim)?;
        Ok(Self { table, count, dim })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, ids: &[usize]) -> Result<Var> {
        let t = g.param(store, self.table);
        g.gather_rows(t, ids)
    }
}
