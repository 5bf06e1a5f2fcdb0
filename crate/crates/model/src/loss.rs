use rakugo_autodiff::{Graph, ParamKind, ParamStore, Var};

use crate::error::{ModelError, Result};

pub const DEFAULT_L2_WEIGHT: f64 = 1e-6;

/// Scalar loss nodes; `total` is the sum of the other four.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub mel_before: Var,
    pub mel_after: Var,
    pub stop: Var,
    pub l2: Var,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub mel_before: f64,
    pub mel_after: f64,
    pub stop: f64,
    pub l2: f64,
}

impl LossTerms {
    pub fn values(&self, g: &Graph) -> LossBreakdown {
        LossBreakdown {
            total: g.scalar(self.total),
            mel_before: g.scalar(self.mel_before),
            mel_after: g.scalar(self.mel_after),
            stop: g.scalar(self.stop),
            l2: g.scalar(self.l2),
        }
    }
}

fn row_mask(g: &mut Graph, rows: usize, cols: usize, valid: usize) -> Result<Var> {
    let v = (0..rows * cols).map(|i| if i / cols < valid { 1.0 } else { 0.0 }).collect();
    Ok(g.constant(v, rows, cols)?)
}

fn check_valid(rows: usize, valid: usize) -> Result<()> {
    if valid == 0 || valid > rows {
        return Err(ModelError::InvalidConfig(format!("{valid} valid frames out of {rows}")));
    }
    Ok(())
}

/// Mean squared error over the first `valid` rows.
pub fn masked_mse(g: &mut Graph, pred: Var, target: Var, valid: usize) -> Result<Var> {
    let (rows, cols) = g.shape(pred);
    check_valid(rows, valid)?;
    let d = g.sub(pred, target)?;
    let m = row_mask(g, rows, cols, valid)?;
    let d = g.mul(d, m)?;
    let s = g.sum_squares(d);
    Ok(g.scale(s, 1.0 / (valid * cols) as f64))
}

/// Binary cross-entropy on logits, `softplus(z) - y z`, averaged over the
/// first `valid` rows.
pub fn masked_bce_with_logits(g: &mut Graph, logits: Var, targets: Var, valid: usize) -> Result<Var> {
    let (rows, cols) = g.shape(logits);
    check_valid(rows, valid)?;
    let sp = g.softplus(logits);
    let yz = g.mul(targets, logits)?;
    let l = g.sub(sp, yz)?;
    let m = row_mask(g, rows, cols, valid)?;
    let l = g.mul(l, m)?;
    let s = g.sum(l);
    Ok(g.scale(s, 1.0 / (valid * cols) as f64))
}

/// Zeros with a one on the last valid frame.
pub fn stop_targets(frames: usize, valid: usize) -> Vec<f64> {
    let mut t = vec![0.0; frames];
    if valid > 0 && valid <= frames {
        t[valid - 1] = 1.0;
    }
    t
}

/// `weight * Σ w²` over every weight matrix (biases, norm and buffers excluded).
pub fn l2_penalty(g: &mut Graph, store: &ParamStore, weight: f64) -> Result<Var> {
    let mut terms = Vec::new();
    for (id, p) in store.iter() {
        if p.kind == ParamKind::Weight && p.tensor.requires_grad() {
            let v = g.param(store, id);
            terms.push(g.sum_squares(v));
        }
    }
    if terms.is_empty() {
        return Ok(g.zeros(1, 1));
    }
    let all = g.concat_cols(&terms)?;
    let s = g.sum(all);
    Ok(g.scale(s, weight))
}

/// Full objective for one utterance; predictions are `[frames, n_mels]`
/// and `stop_logits` is `[frames, 1]`.
#[allow(clippy::too_many_arguments)]
pub fn compute_loss(
    g: &mut Graph,
    store: &ParamStore,
    mel_before: Var,
    mel_after: Var,
    stop_logits: Var,
    target: Var,
    valid: usize,
    l2_weight: f64,
) -> Result<LossTerms> {
    let want = g.shape(target);
    for (what, v) in [("mel before post-net", mel_before), ("mel after post-net", mel_after)] {
        if g.shape(v) != want {
            return Err(ModelError::DimMismatch { what, expected: want.0 * want.1, actual: g.value(v).len() });
        }
    }
    if g.shape(stop_logits) != (want.0, 1) {
        return Err(ModelError::DimMismatch { what: "stop logits", expected: want.0, actual: g.value(stop_logits).len() });
    }
    let mb = masked_mse(g, mel_before, target, valid)?;
    let ma = masked_mse(g, mel_after, target, valid)?;
    let frames = g.rows(stop_logits);
    let st = g.constant(stop_targets(frames, valid), frames, 1)?;
    let stop = masked_bce_with_logits(g, stop_logits, st, valid)?;
    let l2 = l2_penalty(g, store, l2_weight)?;
    let a = g.add(mb, ma)?;
    let b = g.add(stop, l2)?;
    let total = g.add(a, b)?;
    Ok(LossTerms { total, mel_before: mb, mel_after: ma, stop, l2 })
}
