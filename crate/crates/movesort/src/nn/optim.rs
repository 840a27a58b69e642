//! AdamW with a step-decay learning-rate schedule.

use super::params::{Grads, ParamStore, Tensor};

/// Optimizer hyperparameters. Defaults follow the training recipe:
/// learning rate `1e-3`, decoupled weight decay, and a schedule that
/// multiplies the learning rate by `0.1` every 4 epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_gamma: f64,
    pub decay_every_epochs: usize,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            decay_gamma: 0.1,
            decay_every_epochs: 4,
        }
    }
}

/// AdamW state (first/second moments per parameter).
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: u64,
    lr_scale: f64,
}

impl AdamW {
    pub fn new(ps: &ParamStore, config: AdamWConfig) -> Self {
        let zeros = ps.zero_grads();
        let m: Vec<Tensor> = zeros.values().to_vec();
        let v = m.clone();
        Self { config, m, v, steps: 0, lr_scale: 1.0 }
    }

    /// Applies the step-decay schedule for a 0-based epoch index.
    pub fn begin_epoch(&mut self, epoch: usize) {
        let drops = epoch / self.config.decay_every_epochs;
        self.lr_scale = self.config.decay_gamma.powi(drops as i32);
    }

    pub fn effective_lr(&self) -> f64 {
        self.config.lr * self.lr_scale
    }

    /// One decoupled-weight-decay Adam update over every parameter.
    pub fn step(&mut self, ps: &mut ParamStore, grads: &Grads) {
        self.steps += 1;
        let lr = self.effective_lr();
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - c.beta2.powi(self.steps as i32);
        for (idx, grad) in grads.values().iter().enumerate() {
            let g = grad.as_slice();
            let m = self.m[idx].as_slice_mut();
            let v = self.v[idx].as_slice_mut();
            let id = super::params::ParamId(idx);
            let w = ps.tensor_mut(id).as_slice_mut();
            for i in 0..g.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= lr * (m_hat / (v_hat.sqrt() + c.eps) + c.weight_decay * w[i]);
            }
        }
    }
}
