use super::{ParameterStore, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.0002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl<S: Scalar> ParameterStore<S> {
    /// One bias-corrected Adam step at step count `t >= 1`. Nothing is
    /// modified if any gradient is non-finite.
    pub fn adam_update(&mut self, cfg: &AdamConfig, t: u64) -> Result<()> {
        if t == 0 {
            return Err(Error::InvalidArgument("Adam step count starts at 1".into()));
        }
        self.check_grads_finite()?;
        let c1 = 1.0 - cfg.beta1.powf(t as f64);
        let c2 = 1.0 - cfg.beta2.powf(t as f64);
        let (b1, b2) = (S::lit(cfg.beta1), S::lit(cfg.beta2));
        let (one_b1, one_b2) = (S::lit(1.0 - cfg.beta1), S::lit(1.0 - cfg.beta2));
        let (inv_c1, inv_c2) = (S::lit(1.0 / c1), S::lit(1.0 / c2));
        let (lr, eps) = (S::lit(cfg.lr), S::lit(cfg.eps));
        for p in self.iter_mut() {
            let g = p.grad.data();
            let m = p.m.data_mut();
            let v = p.v.data_mut();
            let th = p.value.data_mut();
            for i in 0..g.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                let m_hat = m[i] * inv_c1;
                let v_hat = v[i] * inv_c2;
                th[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`, up to
/// a relative slack of 16 machine epsilons.
/// Returns the scale applied (1 when no clipping happened).
pub fn clip_global_norm<S: Scalar>(store: &mut ParameterStore<S>, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    // a norm already at the cap up to rounding is left alone, so that a
    // second call never rescales what the first one produced
    let slack = 1.0 + 16.0 * S::epsilon().to_f64().unwrap_or(0.0);
    if !(norm > max_norm * slack) || norm == 0.0 {
        return 1.0;
    }
    let scale = max_norm / norm;
    let s = S::lit(scale);
    for p in store.iter_mut() {
        p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
    }
    scale
}
