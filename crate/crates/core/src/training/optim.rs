use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Float, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::config("eps must be positive and weight_decay nonnegative"));
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay. Decay is applied as
/// `p -= lr * weight_decay * p` before the moment update.
#[derive(Clone, Debug)]
pub struct AdamW<F> {
    pub config: AdamWConfig,
    m: ModelParams<F>,
    v: ModelParams<F>,
    t: u64,
}

impl<F: Float> AdamW<F> {
    pub fn new(config: AdamWConfig, params: &ModelParams<F>) -> Self {
        AdamW {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ModelParams<F>, grads: &ModelParams<F>, lr: f64) {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let (one_b1, one_b2) = (F::of(1.0 - c.beta1), F::of(1.0 - c.beta2));
        let step_size = F::of(lr / bc1);
        let bc2_sqrt = F::of(bc2.sqrt());
        let eps = F::of(c.eps);
        let decay = F::of(1.0 - lr * c.weight_decay);
        let apply_decay = lr * c.weight_decay != 0.0;
        for ((((_, mut p), (_, g)), (_, mut m)), (_, mut v)) in params
            .named_mut()
            .into_iter()
            .zip(grads.named())
            .zip(self.m.named_mut())
            .zip(self.v.named_mut())
        {
            Zip::from(&mut p).and(&g).and(&mut m).and(&mut v).for_each(|p, &g, m, v| {
                if apply_decay {
                    *p = *p * decay;
                }
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                if lr != 0.0 {
                    *p = *p - step_size * *m / (v.sqrt() / bc2_sqrt + eps);
                }
            });
        }
    }
}

/// Linear warmup from 0 to `base_lr` over `warmup` steps, then linear decay to
/// 0 at `total`.
pub fn lr_at(step: usize, base_lr: f64, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        base_lr * (step as f64 / warmup as f64)
    } else if step >= total {
        0.0
    } else {
        base_lr * ((total - step) as f64 / (total - warmup).max(1) as f64)
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm<F: Float>(grads: &mut ModelParams<F>, max_norm: f64) -> f64 {
    let norm = grads.sum_of_squares().to_f64().expect("finite").sqrt();
    if norm > max_norm && norm.is_finite() {
        grads.scale(F::of(max_norm / norm));
    }
    norm
}
