use rakugo_autodiff::layers::{Dense, ParamInit};
use rakugo_autodiff::{Graph, ParamStore, Var};

use crate::error::{ModelError, Result};

/// Initial transition probability.
pub const INITIAL_TRANSITION: f64 = 0.5;
const NORMALIZATION_TOLERANCE: f64 = 1e-4;
/// Added to masked logits; `exp` of it underflows to exactly zero.
const MASKED: f64 = -1e30;

/// One forward-attention update on plain vectors:
/// `a'(n) ∝ ((1 - u) a(n) + u a(n - 1)) y(n)`.
pub fn forward_attention_step(alpha: &[f64], u: f64, y: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != y.len() {
        return Err(ModelError::DimMismatch { what: "content distribution", expected: alpha.len(), actual: y.len() });
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(ModelError::InvalidConfig(format!("transition probability {u} outside [0, 1]")));
    }
    let total: f64 = y.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE || y.iter().any(|v| *v < 0.0) {
        return Err(ModelError::NotNormalized(total));
    }
    let mut next: Vec<f64> = (0..alpha.len())
        .map(|n| {
            let shifted = if n == 0 { 0.0 } else { alpha[n - 1] };
            ((1.0 - u) * alpha[n] + u * shifted) * y[n]
        })
        .collect();
    let z: f64 = next.iter().sum();
    if z > 0.0 {
        next.iter_mut().for_each(|v| *v /= z);
    }
    Ok(next)
}

pub fn initial_alignment(len: usize) -> Vec<f64> {
    let mut a = vec![0.0; len];
    if let Some(first) = a.first_mut() {
        *first = 1.0;
    }
    a
}

pub fn expected_position(alpha: &[f64]) -> f64 {
    alpha.iter().enumerate().map(|(n, a)| n as f64 * a).sum()
}

/// Content scores `v · tanh(W q + V h_n)` shared by both attention kinds.
#[derive(Debug, Clone)]
pub struct AdditiveScorer {
    query: Dense,
    memory: Dense,
    v: Dense,
}

impl AdditiveScorer {
    pub fn new(init: &mut ParamInit, query_dim: usize, memory_dim: usize, attn_dim: usize) -> Result<Self> {
        Ok(Self {
            query: Dense::new(init, "query", query_dim, attn_dim, false)?,
            memory: Dense::new(init, "memory", memory_dim, attn_dim, true)?,
            v: Dense::new(init, "v", attn_dim, 1, false)?,
        })
    }

    /// Memory projection, computed once per utterance.
    pub fn process_memory(&self, g: &mut Graph, store: &ParamStore, memory: Var) -> Result<Var> {
        Ok(self.memory.forward(g, store, memory)?)
    }

    /// Softmax over encoder steps, shape `[1, T]`.
    pub fn distribution(&self, g: &mut Graph, store: &ParamStore, processed: Var, query: Var) -> Result<Var> {
        let q = self.query.forward(g, store, query)?;
        let s = g.add(processed, q)?;
        let s = g.tanh(s);
        let e = self.v.forward(g, store, s)?;
        let e = g.transpose(e);
        Ok(g.softmax_rows(e))
    }
}

/// Plain content-based attention, used on the self-attention stream.
#[derive(Debug, Clone)]
pub struct AdditiveAttention {
    scorer: AdditiveScorer,
}

impl AdditiveAttention {
    pub fn new(init: &mut ParamInit, name: &str, query_dim: usize, memory_dim: usize, attn_dim: usize) -> Result<Self> {
        Ok(Self { scorer: AdditiveScorer::new(&mut init.scope(name), query_dim, memory_dim, attn_dim)? })
    }

    pub fn process_memory(&self, g: &mut Graph, store: &ParamStore, memory: Var) -> Result<Var> {
        self.scorer.process_memory(g, store, memory)
    }

    /// Returns `(context [1, D], weights [1, T])`.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, processed: Var, memory: Var, query: Var) -> Result<(Var, Var)> {
        let w = self.scorer.distribution(g, store, processed, query)?;
        Ok((g.matmul(w, memory)?, w))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardAttentionState {
    /// `[1, T]`
    pub alignment: Var,
    /// `[1, 1]`
    pub transition: Var,
    /// `[1, D]`
    pub context: Var,
    /// Content distribution `y` of the last step, `[1, T]`.
    pub content: Var,
}

/// Forward attention with a transition agent.
#[derive(Debug, Clone)]
pub struct ForwardAttention {
    scorer: AdditiveScorer,
    agent: Dense,
}

impl ForwardAttention {
    pub fn new(
        init: &mut ParamInit,
        name: &str,
        query_dim: usize,
        memory_dim: usize,
        attn_dim: usize,
        prenet_dim: usize,
    ) -> Result<Self> {
        let mut s = init.scope(name);
        let scorer = AdditiveScorer::new(&mut s, query_dim, memory_dim, attn_dim)?;
        let agent = Dense::new(&mut s, "agent", memory_dim + query_dim + prenet_dim, 1, true)?;
        Ok(Self { scorer, agent })
    }

    pub fn process_memory(&self, g: &mut Graph, store: &ParamStore, memory: Var) -> Result<Var> {
        self.scorer.process_memory(g, store, memory)
    }

    /// One-hot at the first encoder step, `u = 0.5`, zero context.
    pub fn initial_state(&self, g: &mut Graph, len: usize, memory_dim: usize) -> Result<ForwardAttentionState> {
        let alignment = g.constant(initial_alignment(len), 1, len)?;
        Ok(ForwardAttentionState {
            alignment,
            transition: g.full(1, 1, INITIAL_TRANSITION),
            context: g.zeros(1, memory_dim),
            content: alignment,
        })
    }

    pub fn step(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        processed: Var,
        memory: Var,
        query: Var,
        prenet_out: Var,
        prev: ForwardAttentionState,
    ) -> Result<ForwardAttentionState> {
        let y = self.scorer.distribution(g, store, processed, query)?;
        let stay = g.one_minus(prev.transition);
        let stay = g.mul(prev.alignment, stay)?;
        let moved = g.shift_cols(prev.alignment);
        let moved = g.mul(moved, prev.transition)?;
        let prior = g.add(stay, moved)?;
        let raw = g.mul(prior, y)?;
        let z = g.sum(raw);
        let z = g.clamp_min(z, 1e-300);
        let alignment = g.div(raw, z)?;
        let context = g.matmul(alignment, memory)?;
        let agent_in = g.concat_cols(&[context, query, prenet_out])?;
        let u = self.agent.forward(g, store, agent_in)?;
        let transition = g.sigmoid(u);
        Ok(ForwardAttentionState { alignment, transition, context, content: y })
    }
}

/// Scaled dot-product attention with learned projections and `heads`
/// equal slices; no output projection.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    q: Dense,
    k: Dense,
    v: Dense,
    pub heads: usize,
    pub head_dim: usize,
}

impl MultiHeadAttention {
    pub fn new(init: &mut ParamInit, name: &str, query_dim: usize, key_dim: usize, total: usize, heads: usize) -> Result<Self> {
        if heads == 0 || total % heads != 0 {
            return Err(ModelError::InvalidConfig(format!("{heads} heads do not divide width {total}")));
        }
        let mut s = init.scope(name);
        Ok(Self {
            q: Dense::new(&mut s, "q", query_dim, total, false)?,
            k: Dense::new(&mut s, "k", key_dim, total, false)?,
            v: Dense::new(&mut s, "v", key_dim, total, false)?,
            heads,
            head_dim: total / heads,
        })
    }

    pub fn project_keys(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<(Var, Var)> {
        Ok((self.k.forward(g, store, x)?, self.v.forward(g, store, x)?))
    }

    /// Attends projected queries over projected keys/values. With `causal`,
    /// query row `i` sees key rows `0..=i + offset`, where `offset` is
    /// `keys - queries`. Returns the concatenated heads and per-head weights.
    pub fn attend(
        &self,
        g: &mut Graph,
        q: Var,
        k: Var,
        v: Var,
        causal: bool,
        dropout: f64,
    ) -> Result<(Var, Vec<Var>)> {
        let (tq, tk) = (g.rows(q), g.rows(k));
        let mask = if causal && tk > 1 {
            let offset = tk.saturating_sub(tq);
            let m: Vec<f64> = (0..tq * tk)
                .map(|idx| if idx % tk > idx / tk + offset { MASKED } else { 0.0 })
                .collect();
            Some(g.constant(m, tq, tk)?)
        } else {
            None
        };
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * self.head_dim, self.head_dim)?;
            let kh = g.slice_cols(k, h * self.head_dim, self.head_dim)?;
            let vh = g.slice_cols(v, h * self.head_dim, self.head_dim)?;
            let logits = g.matmul_t(qh, kh)?;
            let mut logits = g.scale(logits, scale);
            if let Some(m) = mask {
                logits = g.add(logits, m)?;
            }
            let w = g.softmax_rows(logits);
            weights.push(w);
            let w = g.dropout(w, dropout)?;
            outs.push(g.matmul(w, vh)?);
        }
        Ok((g.concat_cols(&outs)?, weights))
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, causal: bool, dropout: f64) -> Result<(Var, Vec<Var>)> {
        let q = self.q.forward(g, store, x)?;
        let (k, v) = self.project_keys(g, store, x)?;
        self.attend(g, q, k, v, causal, dropout)
    }

    pub fn query(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        Ok(self.q.forward(g, store, x)?)
    }
}

/// Encoder block: `a = MHA(x)`, output `a + tanh(W a + b)`.
#[derive(Debug, Clone)]
pub struct EncoderSelfAttention {
    pub mha: MultiHeadAttention,
    dense: Dense,
    dropout: f64,
}

impl EncoderSelfAttention {
    pub fn new(init: &mut ParamInit, name: &str, input: usize, width: usize, heads: usize, dropout: f64) -> Result<Self> {
        let mut s = init.scope(name);
        let mha = MultiHeadAttention::new(&mut s, "mha", input, input, width, heads)?;
        let dense = Dense::new(&mut s, "dense", width, width, true)?;
        Ok(Self { mha, dense, dropout })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<(Var, Vec<Var>)> {
        let (a, w) = self.mha.forward(g, store, x, false, self.dropout)?;
        let d = self.dense.forward(g, store, a)?;
        let d = g.tanh(d);
        Ok((g.add(a, d)?, w))
    }
}

/// Causal decoder block: output `x + tanh(W MHA(x) + b)`. Zeroing `W` and
/// `b` makes it the identity.
#[derive(Debug, Clone)]
pub struct DecoderSelfAttention {
    pub mha: MultiHeadAttention,
    pub dense: Dense,
    dropout: f64,
}

/// Keys and values of the steps decoded so far.
#[derive(Debug, Default, Clone)]
pub struct SelfAttentionCache {
    keys: Vec<Var>,
    values: Vec<Var>,
}

impl DecoderSelfAttention {
    pub fn new(init: &mut ParamInit, name: &str, width: usize, heads: usize, dropout: f64) -> Result<Self> {
        let mut s = init.scope(name);
        let mha = MultiHeadAttention::new(&mut s, "mha", width, width, width, heads)?;
        let dense = Dense::new(&mut s, "dense", width, width, true)?;
        Ok(Self { mha, dense, dropout })
    }

    fn residual(&self, g: &mut Graph, store: &ParamStore, x: Var, a: Var) -> Result<Var> {
        let d = self.dense.forward(g, store, a)?;
        let d = g.tanh(d);
        Ok(g.add(x, d)?)
    }

    /// Whole sequence at once (teacher forcing).
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<(Var, Vec<Var>)> {
        let (a, w) = self.mha.forward(g, store, x, true, self.dropout)?;
        Ok((self.residual(g, store, x, a)?, w))
    }

    /// One new row `x_t`, attending over every cached step and itself.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, cache: &mut SelfAttentionCache, x_t: Var) -> Result<Var> {
        let (k, v) = self.mha.project_keys(g, store, x_t)?;
        cache.keys.push(k);
        cache.values.push(v);
        let k = g.concat_rows(&cache.keys)?;
        let v = g.concat_rows(&cache.values)?;
        let q = self.mha.query(g, store, x_t)?;
        let (a, _) = self.mha.attend(g, q, k, v, false, self.dropout)?;
        self.residual(g, store, x_t, a)
    }
}
