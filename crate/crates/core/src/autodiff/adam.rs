//! Adam with decoupled weight decay.

use alloc::vec::Vec;

use super::params::ParamStore;
use super::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One optimizer step over every learnable entry with a gradient.
///
/// Weight decay is decoupled: p ← p − lr·wd·p happens before the
/// bias-corrected Adam delta is applied.
pub fn adam_step<T: Scalar>(
    store: &mut ParamStore<T>,
    grads: &[Option<Vec<T>>],
    cfg: &AdamConfig,
) {
    assert_eq!(grads.len(), store.len(), "gradient slots must align with entries");
    store.step += 1;
    let t = store.step as i32;
    let lr = T::from_f64(cfg.lr);
    let wd = T::from_f64(cfg.weight_decay);
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let eps = T::from_f64(cfg.eps);
    let one = T::ONE;
    let bc1 = T::from_f64(1.0 - libm::pow(cfg.beta1, t as f64));
    let bc2 = T::from_f64(1.0 - libm::pow(cfg.beta2, t as f64));

    for idx in 0..store.len() {
        let Some(grad) = &grads[idx] else { continue };
        let e = store.entry_mut(idx);
        if !e.learnable {
            continue;
        }
        assert_eq!(grad.len(), e.data.len(), "{}: gradient shape mismatch", e.name);
        for i in 0..e.data.len() {
            let g = grad[i];
            let decayed = e.data[i] - lr * wd * e.data[i];
            e.data[i] = decayed;
            e.m[i] = b1 * e.m[i] + (one - b1) * g;
            e.v[i] = b2 * e.v[i] + (one - b2) * g * g;
            let m_hat = e.m[i] / bc1;
            let v_hat = e.v[i] / bc2;
            e.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
