use super::ParamInit;
use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, Mode, Var};
use crate::params::{ParamId, ParamKind, ParamStore};

/// Hidden and cell vectors of an LSTM, each `[1, hidden]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmState {
    pub fn zeros(g: &mut Graph, hidden: usize) -> Self {
        Self {
            h: g.zeros(1, hidden),
            c: g.zeros(1, hidden),
        }
    }
}

/// Zoneout between a previous and a freshly computed state vector.
///
/// Training draws a per-unit Bernoulli(`p`) mask and keeps the previous
/// value where it is set; eval mode uses the expectation
/// `p * prev + (1 - p) * new`.
pub fn zoneout(g: &mut Graph, prev: Var, new: Var, p: f64) -> Result<Var> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AutodiffError::InvalidProbability(p));
    }
    if p == 0.0 {
        return Ok(new);
    }
    let (keep_prev, keep_new) = match g.mode() {
        Mode::Train => {
            let (r, c) = g.shape(new);
            let m = g.bernoulli_mask(r, c, p)?;
            let inv = g.one_minus(m);
            (m, inv)
        }
        Mode::Eval => (g.full(1, 1, p), g.full(1, 1, 1.0 - p)),
    };
    let a = g.mul(prev, keep_prev)?;
    let b = g.mul(new, keep_new)?;
    g.add(a, b)
}

/// LSTM with gates ordered `i, f, g, o`; input kernel `[in, 4h]`,
/// recurrent kernel `[h, 4h]`, forget-gate bias initialised to one.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(init: &mut ParamInit, name: &str, input_dim: usize, hidden: usize) -> Result<Self> {
        let mut s = init.scope(name);
        let w_input = s.glorot("w_input", vec![input_dim, 4 * hidden], input_dim, 4 * hidden)?;
        let w_hidden = s.glorot("w_hidden", vec![hidden, 4 * hidden], hidden, 4 * hidden)?;
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(1.0);
        let bias = s.tensor("bias", ParamKind::Bias, crate::Tensor::new(vec![4 * hidden], b)?)?;
        Ok(Self {
            w_input,
            w_hidden,
            bias,
            input_dim,
            hidden,
        })
    }

    /// `x · W_input + b` for every row of `x` at once.
    pub fn project_inputs(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w_input);
        let b = g.param(store, self.bias);
        let p = g.matmul(x, w)?;
        g.add(p, b)
    }

    /// One step given an already projected input row `[1, 4h]`.
    pub fn step_projected(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        projected: Var,
        prev: LstmState,
        zoneout_p: f64,
    ) -> Result<LstmState> {
        let h = self.hidden;
        let wh = g.param(store, self.w_hidden);
        let rec = g.matmul(prev.h, wh)?;
        let gates = g.add(projected, rec)?;
        let i = g.slice_cols(gates, 0, h)?;
        let f = g.slice_cols(gates, h, h)?;
        let cand = g.slice_cols(gates, 2 * h, h)?;
        let o = g.slice_cols(gates, 3 * h, h)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cand = g.tanh(cand);
        let o = g.sigmoid(o);
        let keep = g.mul(f, prev.c)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h_new = g.mul(o, tc)?;
        Ok(LstmState {
            h: zoneout(g, prev.h, h_new, zoneout_p)?,
            c: zoneout(g, prev.c, c, zoneout_p)?,
        })
    }

    /// One LSTM step with zoneout applied to both state vectors.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, input: Var, prev: LstmState, zoneout_p: f64) -> Result<LstmState> {
        if !(0.0..=1.0).contains(&zoneout_p) {
            return Err(AutodiffError::InvalidProbability(zoneout_p));
        }
        let projected = self.project_inputs(g, store, input)?;
        self.step_projected(g, store, projected, prev, zoneout_p)
    }

    /// Runs over the rows of `x`, optionally right to left, and returns the
    /// hidden states stacked in time order `[t, h]`.
    pub fn sequence(&self, g: &mut Graph, store: &ParamStore, x: Var, reverse: bool, zoneout_p: f64) -> Result<Var> {
        let t = g.rows(x);
        let proj = self.project_inputs(g, store, x)?;
        let mut state = LstmState::zeros(g, self.hidden);
        let mut outs = vec![state.h; t];
        let order: Box<dyn Iterator<Item = usize>> = if reverse { Box::new((0..t).rev()) } else { Box::new(0..t) };
        for step in order {
            let row = g.row(proj, step)?;
            state = self.step_projected(g, store, row, state, zoneout_p)?;
            outs[step] = state.h;
        }
        g.concat_rows(&outs)
    }
}

/// Bidirectional LSTM; output rows are `[forward_h, backward_h]`.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

impl BiLstm {
    pub fn new(init: &mut ParamInit, name: &str, input_dim: usize, hidden_per_direction: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(Self {
            forward: Lstm::new(&mut s, "fw", input_dim, hidden_per_direction)?,
            backward: Lstm::new(&mut s, "bw", input_dim, hidden_per_direction)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, zoneout_p: f64) -> Result<Var> {
        let f = self.forward.sequence(g, store, x, false, zoneout_p)?;
        let b = self.backward.sequence(g, store, x, true, zoneout_p)?;
        g.concat_cols(&[f, b])
    }
}

/// GRU with gates ordered `r, z, n`:
/// `n = tanh(x W_n + b_n + r * (h U_n + c_n))`, `h' = (1 - z) * n + z * h`.
#[derive(Debug, Clone)]
pub struct Gru {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub b_input: ParamId,
    pub b_hidden: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl Gru {
    pub fn new(init: &mut ParamInit, name: &str, input_dim: usize, hidden: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(Self {
            w_input: s.glorot("w_input", vec![input_dim, 3 * hidden], input_dim, 3 * hidden)?,
            w_hidden: s.glorot("w_hidden", vec![hidden, 3 * hidden], hidden, 3 * hidden)?,
            b_input: s.constant("b_input", ParamKind::Bias, vec![3 * hidden], 0.0)?,
            b_hidden: s.constant("b_hidden", ParamKind::Bias, vec![3 * hidden], 0.0)?,
            input_dim,
            hidden,
        })
    }

    pub fn step_projected(&self, g: &mut Graph, store: &ParamStore, projected: Var, prev: Var) -> Result<Var> {
        let h = self.hidden;
        let wh = g.param(store, self.w_hidden);
        let bh = g.param(store, self.b_hidden);
        let rec = g.matmul(prev, wh)?;
        let rec = g.add(rec, bh)?;
        let xr = g.slice_cols(projected, 0, h)?;
        let xz = g.slice_cols(projected, h, h)?;
        let xn = g.slice_cols(projected, 2 * h, h)?;
        let hr = g.slice_cols(rec, 0, h)?;
        let hz = g.slice_cols(rec, h, h)?;
        let hn = g.slice_cols(rec, 2 * h, h)?;
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r);
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z);
        let gated = g.mul(r, hn)?;
        let n = g.add(xn, gated)?;
        let n = g.tanh(n);
        let one_minus_z = g.one_minus(z);
        let a = g.mul(one_minus_z, n)?;
        let b = g.mul(z, prev)?;
        g.add(a, b)
    }

    /// Runs over all rows of `x` and returns the final hidden state `[1, h]`.
    pub fn final_state(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let wi = g.param(store, self.w_input);
        let bi = g.param(store, self.b_input);
        let proj = g.matmul(x, wi)?;
        let proj = g.add(proj, bi)?;
        let mut h = g.zeros(1, self.hidden);
        for t in 0..g.rows(x) {
            let row = g.row(proj, t)?;
            h = self.step_projected(g, store, row, h)?;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lstm() -> (ParamStore, Lstm) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Lstm::new(&mut ParamInit::new(&mut store, &mut rng), "lstm", 3, 4).unwrap();
        (store, l)
    }

    fn run_step(store: &ParamStore, l: &Lstm, mode: Mode, seed: u64, p: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(mode, seed);
        let x = g.constant(vec![0.5, -1.0, 0.25], 1, 3)?;
        let prev = LstmState {
            h: g.constant(vec![0.1, -0.2, 0.3, 0.4], 1, 4)?,
            c: g.constant(vec![-0.5, 0.6, 0.7, -0.8], 1, 4)?,
        };
        let next = l.step(&mut g, store, x, prev, p)?;
        Ok((
            g.value(next.h).to_vec(),
            g.value(next.c).to_vec(),
            g.value(prev.h).to_vec(),
            g.value(prev.c).to_vec(),
        ))
    }

    #[test]
    fn full_zoneout_keeps_previous_state() {
        let (store, l) = lstm();
        let (h, c, ph, pc) = run_step(&store, &l, Mode::Train, 9, 1.0).unwrap();
        assert_eq!(h, ph);
        assert_eq!(c, pc);
    }

    #[test]
    fn zero_zoneout_is_plain_lstm() {
        let (store, l) = lstm();
        let a = run_step(&store, &l, Mode::Train, 1, 0.0).unwrap();
        let b = run_step(&store, &l, Mode::Eval, 2, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zoneout_mask_replays_under_same_seed() {
        let (store, l) = lstm();
        let a = run_step(&store, &l, Mode::Train, 77, 0.1).unwrap();
        let b = run_step(&store, &l, Mode::Train, 77, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zoneout_probability_validated() {
        let (store, l) = lstm();
        assert_eq!(
            run_step(&store, &l, Mode::Train, 0, 1.5).unwrap_err(),
            AutodiffError::InvalidProbability(1.5)
        );
        assert!(run_step(&store, &l, Mode::Eval, 0, -0.1).is_err());
    }

    #[test]
    fn bidirectional_output_doubles_width() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bi = BiLstm::new(&mut ParamInit::new(&mut store, &mut rng), "enc", 6, 5).unwrap();
        let mut g = Graph::new(Mode::Eval, 0);
        let x = g.constant(vec![0.1; 7 * 6], 7, 6).unwrap();
        let y = bi.forward(&mut g, &store, x, 0.0).unwrap();
        assert_eq!(g.shape(y), (7, 10));
        assert_eq!(bi.output_dim(), 10);
    }
}
