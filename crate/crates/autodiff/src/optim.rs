use crate::error::{AutodiffError, Result};
use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of a flat parameter slice. `step` is the
/// 1-based index of this update.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || m.len() != n || v.len() != n {
        return Err(AutodiffError::ShapeMismatch {
            op: "adam_update",
            lhs: vec![n],
            rhs: vec![grads.len(), m.len(), v.len()],
        });
    }
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..n {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Adam moments for every array in a [`ParamStore`], indexed by parameter id.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.tensor.len()]).collect();
        Self {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    /// Applies the gradients accumulated in `store`. Parameters that were
    /// not reached by any backward pass are left untouched.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.first_moment.len() != store.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "adam_step",
                lhs: vec![self.first_moment.len()],
                rhs: vec![store.len()],
            });
        }
        self.step += 1;
        let ids: Vec<ParamId> = store.trainable().collect();
        for id in ids {
            let i = id.index();
            let tensor = store.get_mut(id);
            let Some(grad) = tensor.grad().map(<[f64]>::to_vec) else { continue };
            adam_update(
                tensor.values_mut(),
                &grad,
                &mut self.first_moment[i],
                &mut self.second_moment[i],
                self.step,
                &self.config,
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamKind;
    use crate::Tensor;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = vec![1.0, -2.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        assert!(adam_update(&mut p, &[0.0], &mut m, &mut v, 1, &AdamConfig::default()).is_err());
    }

    #[test]
    fn step_counter_advances() {
        let mut store = ParamStore::new();
        let id = store.add("x", ParamKind::Weight, Tensor::full(vec![1], 1.0)).unwrap();
        let mut adam = AdamState::new(AdamConfig::default(), &store);
        for _ in 0..2 {
            store.zero_grad();
            store.get_mut(id).accumulate_grad(&[2.0]).unwrap();
            adam.step(&mut store).unwrap();
        }
        assert_eq!(adam.step, 2);
    }
}
