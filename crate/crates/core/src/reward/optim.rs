//! AdamW with decoupled weight decay and a cosine learning-rate schedule.

use std::f64::consts::PI;

/// `base_lr · (1 + cos(π·t/T)) / 2`, reaching exactly 0 at `t = T`.
pub fn cosine_lr(base_lr: f64, step: usize, total_steps: usize) -> f64 {
    if total_steps == 0 || step >= total_steps {
        return 0.0;
    }
    base_lr * (1.0 + (PI * step as f64 / total_steps as f64).cos()) / 2.0
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(dim: usize, weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One update. Only the first `decay_len` coordinates are decayed.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, decay_len: usize) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            if i < decay_len {
                *p *= 1.0 - lr * self.weight_decay;
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
