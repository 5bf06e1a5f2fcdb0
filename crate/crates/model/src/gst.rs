use std::fmt;
use std::str::FromStr;

use rakugo_autodiff::layers::{BatchNorm, Conv2d, Dense, Gru, ParamInit};
use rakugo_autodiff::{Graph, ParamId, ParamStore, Var};

use crate::error::{ModelError, Result};

const SIMPLEX_TOLERANCE: f64 = 1e-6;

pub fn check_heads(dim: usize, heads: usize) -> Result<()> {
    if heads == 0 || dim % heads != 0 {
        return Err(ModelError::InvalidConfig(format!("{heads} style-token heads do not divide width {dim}")));
    }
    Ok(())
}

/// Strided 2-D conv stack over the mel "image" followed by a GRU summary.
#[derive(Debug, Clone)]
pub struct ReferenceEncoder {
    convs: Vec<(Conv2d, BatchNorm)>,
    gru: Gru,
    n_mels: usize,
}

impl ReferenceEncoder {
    pub fn new(init: &mut ParamInit, name: &str, n_mels: usize, filters: &[usize], gru: usize) -> Result<Self> {
        let mut s = init.scope(name);
        let mut convs = Vec::with_capacity(filters.len());
        let (mut channels, mut width) = (1, n_mels);
        for (i, &f) in filters.iter().enumerate() {
            let conv = Conv2d::new(&mut s, &format!("conv{i}"), channels, f, 3, 2, false)?;
            let bn = BatchNorm::new(&mut s, &format!("bn{i}"), f)?;
            convs.push((conv, bn));
            channels = f;
            width = width.div_ceil(2);
        }
        let gru = Gru::new(&mut s, "gru", width * channels, gru)?;
        Ok(Self { convs, gru, n_mels })
    }

    /// Short references are zero padded to one frame per halving.
    pub fn min_frames(&self) -> usize {
        1 << self.convs.len()
    }

    /// Time extent after the conv stack for an input of `frames`.
    pub fn output_frames(&self, frames: usize) -> usize {
        (0..self.convs.len()).fold(frames.max(self.min_frames()), |t, _| t.div_ceil(2))
    }

    /// `mel` is `[frames, n_mels]`; returns `[1, gru]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, mel: Var) -> Result<Var> {
        let (frames, width) = g.shape(mel);
        if width != self.n_mels {
            return Err(ModelError::DimMismatch { what: "reference mel", expected: self.n_mels, actual: width });
        }
        if frames == 0 {
            return Err(ModelError::EmptyInput("reference mel"));
        }
        let mut x = mel;
        let mut h = frames;
        if frames < self.min_frames() {
            h = self.min_frames();
            let pad = g.zeros(h - frames, width);
            x = g.concat_rows(&[x, pad])?;
        }
        // pixels in row-major (time, mel) order with one channel
        let mut x = g.reshape(x, h * width, 1)?;
        let mut w = width;
        for (conv, bn) in &self.convs {
            let (y, oh, ow) = conv.forward(g, store, x, h, w)?;
            let y = bn.forward(g, store, y)?;
            x = g.relu(y);
            h = oh;
            w = ow;
        }
        let c = g.cols(x);
        let seq = g.reshape(x, h, w * c)?;
        Ok(self.gru.final_state(g, store, seq)?)
    }
}

/// Learned token bank attended by the reference embedding.
#[derive(Debug, Clone)]
pub struct StyleTokenLayer {
    pub tokens: ParamId,
    query: Dense,
    key: Dense,
    value: Dense,
    pub n_tokens: usize,
    pub dim: usize,
    pub heads: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct StyleOutput {
    /// `[1, dim]`
    pub embedding: Var,
    /// `[heads, n_tokens]`
    pub weights: Var,
}

impl StyleTokenLayer {
    pub fn new(init: &mut ParamInit, name: &str, query_dim: usize, n_tokens: usize, dim: usize, heads: usize) -> Result<Self> {
        check_heads(dim, heads)?;
        let mut s = init.scope(name);
        let tokens = s.uniform("tokens", vec![n_tokens, dim], 0.5)?;
        Ok(Self {
            tokens,
            query: Dense::new(&mut s, "query", query_dim, dim, false)?,
            key: Dense::new(&mut s, "key", dim, dim, false)?,
            value: Dense::new(&mut s, "value", dim, dim, false)?,
            n_tokens,
            dim,
            heads,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    fn values(&self, g: &mut Graph, store: &ParamStore) -> Result<Var> {
        let t = g.param(store, self.tokens);
        let t = g.tanh(t);
        Ok(self.value.forward(g, store, t)?)
    }

    /// Attention of `reference` (`[1, query_dim]`) over the tokens.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, reference: Var) -> Result<StyleOutput> {
        let q = self.query.forward(g, store, reference)?;
        let t = g.param(store, self.tokens);
        let t = g.tanh(t);
        let k = self.key.forward(g, store, t)?;
        let v = self.value.forward(g, store, t)?;
        let d = self.head_dim();
        let scale = 1.0 / (d as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut ws = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * d, d)?;
            let kh = g.slice_cols(k, h * d, d)?;
            let vh = g.slice_cols(v, h * d, d)?;
            let logits = g.matmul_t(qh, kh)?;
            let logits = g.scale(logits, scale);
            let w = g.softmax_rows(logits);
            outs.push(g.matmul(w, vh)?);
            ws.push(w);
        }
        Ok(StyleOutput { embedding: g.concat_cols(&outs)?, weights: g.concat_rows(&ws)? })
    }

    /// Style embedding from explicit per-head token weights.
    pub fn from_weights(&self, g: &mut Graph, store: &ParamStore, weights: &StyleWeights) -> Result<Var> {
        if weights.heads() != self.heads || weights.tokens() != self.n_tokens {
            return Err(ModelError::InvalidStyleWeights(format!(
                "expected {} rows of {} weights, got {} rows of {}",
                self.heads,
                self.n_tokens,
                weights.heads(),
                weights.tokens()
            )));
        }
        let v = self.values(g, store)?;
        let d = self.head_dim();
        let mut outs = Vec::with_capacity(self.heads);
        for (h, row) in weights.rows().iter().enumerate() {
            let w = g.constant(row.clone(), 1, self.n_tokens)?;
            let vh = g.slice_cols(v, h * d, d)?;
            outs.push(g.matmul(w, vh)?);
        }
        Ok(g.concat_cols(&outs)?)
    }

    /// Plain-vector version of [`from_weights`](Self::from_weights).
    pub fn style_from_weights(&self, store: &ParamStore, weights: &StyleWeights) -> Result<Vec<f64>> {
        let mut g = Graph::new(rakugo_autodiff::Mode::Eval, 0);
        let v = self.from_weights(&mut g, store, weights)?;
        Ok(g.value(v).to_vec())
    }
}

/// One probability vector over the tokens per attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleWeights {
    rows: Vec<Vec<f64>>,
}

impl StyleWeights {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let bad = |m: String| Err(ModelError::InvalidStyleWeights(m));
        let Some(first) = rows.first() else {
            return bad("no rows".into());
        };
        let n = first.len();
        if n == 0 {
            return bad("empty row".into());
        }
        for (h, row) in rows.iter().enumerate() {
            if row.len() != n {
                return bad(format!("row {h} has {} weights, expected {n}", row.len()));
            }
            if let Some(w) = row.iter().find(|w| !w.is_finite() || **w < 0.0) {
                return bad(format!("row {h} has invalid weight {w}"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
                return bad(format!("row {h} sums to {total}"));
            }
        }
        Ok(Self { rows })
    }

    /// The same distribution for every head.
    pub fn shared(row: Vec<f64>, heads: usize) -> Result<Self> {
        Self::new(vec![row; heads])
    }

    pub fn one_hot(token: usize, n_tokens: usize, heads: usize) -> Result<Self> {
        if token >= n_tokens {
            return Err(ModelError::InvalidStyleWeights(format!("token {token} out of {n_tokens}")));
        }
        let mut row = vec![0.0; n_tokens];
        row[token] = 1.0;
        Self::shared(row, heads)
    }

    pub fn uniform(n_tokens: usize, heads: usize) -> Result<Self> {
        Self::shared(vec![1.0 / n_tokens as f64; n_tokens], heads)
    }

    pub fn heads(&self) -> usize {
        self.rows.len()
    }

    pub fn tokens(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl FromStr for StyleWeights {
    type Err = ModelError;

    /// One head per non-empty line; weights separated by whitespace or
    /// commas. `#` starts a comment.
    fn from_str(s: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| ModelError::InvalidStyleWeights(format!("line {}: bad number `{t}`", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }
}

impl fmt::Display for StyleWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|w| format!("{w}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Reference encoder plus token layer.
#[derive(Debug, Clone)]
pub struct GlobalStyleTokens {
    pub reference: ReferenceEncoder,
    pub tokens: StyleTokenLayer,
}

impl GlobalStyleTokens {
    pub fn new(
        init: &mut ParamInit,
        name: &str,
        n_mels: usize,
        filters: &[usize],
        gru: usize,
        n_tokens: usize,
        dim: usize,
        heads: usize,
    ) -> Result<Self> {
        let mut s = init.scope(name);
        let reference = ReferenceEncoder::new(&mut s, "reference", n_mels, filters, gru)?;
        let tokens = StyleTokenLayer::new(&mut s, "tokens", gru, n_tokens, dim, heads)?;
        Ok(Self { reference, tokens })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, mel: Var) -> Result<StyleOutput> {
        let r = self.reference.forward(g, store, mel)?;
        self.tokens.forward(g, store, r)
    }
}
