use super::ParamInit;
use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{BatchStatUpdate, ParamId, ParamKind, ParamStore};

/// Batch normalisation over the rows of a `[rows, channels]` input.
///
/// The variance is floored at `eps` rather than offset by it, so a
/// standardised batch passes through unchanged while constant channels
/// still map to zero.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub const DEFAULT_EPS: f64 = 1e-3;
    pub const DEFAULT_MOMENTUM: f64 = 0.99;

    pub fn new(init: &mut ParamInit, name: &str, channels: usize) -> Result<Self> {
        let mut s = init.scope(name);
        Ok(Self {
            gamma: s.constant("gamma", ParamKind::Norm, vec![channels], 1.0)?,
            beta: s.constant("beta", ParamKind::Norm, vec![channels], 0.0)?,
            running_mean: s.constant("running_mean", ParamKind::Buffer, vec![channels], 0.0)?,
            running_var: s.constant("running_var", ParamKind::Buffer, vec![channels], 1.0)?,
            channels,
            eps: Self::DEFAULT_EPS,
            momentum: Self::DEFAULT_MOMENTUM,
        })
    }

    /// Training graphs normalise with batch statistics and queue a running
    /// statistics update on the graph; eval graphs use the running values.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let (centred, denom) = if g.is_training() {
            let mean = g.mean_rows(x);
            let xc = g.sub(x, mean)?;
            let sq = g.mul(xc, xc)?;
            let var = g.mean_rows(sq);
            g.record_batch_stats(BatchStatUpdate {
                mean_id: self.running_mean,
                var_id: self.running_var,
                momentum: self.momentum,
                mean: g.value(mean).to_vec(),
                var: g.value(var).to_vec(),
            });
            let floored = g.clamp_min(var, self.eps);
            (xc, g.powf(floored, -0.5))
        } else {
            let mean = g.param(store, self.running_mean);
            let xc = g.sub(x, mean)?;
            let var = g.param(store, self.running_var);
            let floored = g.clamp_min(var, self.eps);
            (xc, g.powf(floored, -0.5))
        };
        let normed = g.mul(centred, denom)?;
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        let scaled = g.mul(normed, gamma)?;
        g.add(scaled, beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(channels: usize) -> (ParamStore, BatchNorm) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bn = BatchNorm::new(&mut ParamInit::new(&mut store, &mut rng), "bn", channels).unwrap();
        (store, bn)
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let (store, bn) = layer(2);
        let mut g = Graph::new(Mode::Train, 0);
        let x = g.constant(vec![3.0, 1.0, 3.0, 2.0, 3.0, 3.0], 3, 2).unwrap();
        let y = bn.forward(&mut g, &store, x).unwrap();
        let v = g.value(y);
        assert_eq!([v[0], v[2], v[4]], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardised_batch_is_unchanged() {
        let (store, bn) = layer(1);
        let vals = vec![-1.0, 1.0, -1.0, 1.0];
        let mut g = Graph::new(Mode::Train, 0);
        let x = g.constant(vals.clone(), 4, 1).unwrap();
        let y = bn.forward(&mut g, &store, x).unwrap();
        for (a, b) in g.value(y).iter().zip(&vals) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn running_stats_match_batch_stats_when_forced() {
        let (mut store, bn) = layer(2);
        let vals = vec![0.3, -1.2, 2.5, 0.7, -0.4, 1.9, 1.1, 0.0];
        let mut g = Graph::new(Mode::Train, 0);
        let x = g.constant(vals.clone(), 4, 2).unwrap();
        let y_train = bn.forward(&mut g, &store, x).unwrap();
        let y_train = g.value(y_train).to_vec();
        let mut stats = g.take_batch_stats();
        assert_eq!(stats.len(), 1);
        // momentum 0 copies the batch statistics straight into the buffers
        stats[0].momentum = 0.0;
        store.apply_batch_stats(&stats);

        let mut g = Graph::new(Mode::Eval, 0);
        let x = g.constant(vals, 4, 2).unwrap();
        let y_eval = bn.forward(&mut g, &store, x).unwrap();
        for (a, b) in g.value(y_eval).iter().zip(&y_train) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
