//! Adam and global-norm gradient clipping.

use super::tensor::{Gradients, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    /// Apply one bias-corrected update. Moments live in the store; the step
    /// counter advances by one.
    pub fn step(&self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::numeric("non-finite gradient"));
        }
        store.step += 1;
        let t = store.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for id in store.ids().collect::<Vec<_>>() {
            let g = grads.get(id);
            let p = store.get_mut(id);
            if p.frozen {
                continue;
            }
            let values = p.value.data_mut();
            for i in 0..values.len() {
                let gi = g[i];
                p.moment1[i] = self.beta1 * p.moment1[i] + (1.0 - self.beta1) * gi;
                p.moment2[i] = self.beta2 * p.moment2[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = p.moment1[i] / bias1;
                let v_hat = p.moment2[i] / bias2;
                values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Rescale all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}
