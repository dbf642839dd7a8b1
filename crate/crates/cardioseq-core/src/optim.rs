//! Adam optimizer with optional global-norm gradient clipping.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::nn::ParamSet;
use crate::tensor::Tensor;

/// Standard moment coefficients; recorded alongside checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Deterministic square root via a bit-level reciprocal estimate refined by
/// Newton iterations; float-accurate to a few ulp and far faster than the
/// software libm path at the optimizer's per-element scale.
#[inline]
fn fast_sqrt_f32(x: f32) -> f32 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut r = f32::from_bits(0x5F37_59DF - (x.to_bits() >> 1));
    // Newton on 1/sqrt: r <- r (1.5 - 0.5 x r^2)
    let half_x = 0.5 * x;
    r = r * (1.5 - half_x * r * r);
    r = r * (1.5 - half_x * r * r);
    r = r * (1.5 - half_x * r * r);
    x * r
}

pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Adam {
        let m = (0..params.len())
            .map(|i| {
                let (r, c) = params.tensor_by_index(i).shape();
                Tensor::zeros(r, c)
            })
            .collect();
        let v = (0..params.len())
            .map(|i| {
                let (r, c) = params.tensor_by_index(i).shape();
                Tensor::zeros(r, c)
            })
            .collect();
        Adam {
            config,
            m,
            v,
            t: 0,
        }
    }

    /// Applies one update. `grads[i]` pairs with parameter `i`; `None` means
    /// zero gradient. Returns the global gradient norm before clipping.
    pub fn step(
        &mut self,
        params: &mut ParamSet,
        grads: &mut [Option<Tensor>],
        clip_norm: Option<f64>,
    ) -> f64 {
        debug_assert_eq!(grads.len(), params.len());
        let norm_sq: f64 = grads
            .iter()
            .flatten()
            .map(|g| g.frobenius_norm_sq())
            .sum();
        let norm = libm::sqrt(norm_sq);
        let clip_scale = match clip_norm {
            Some(c) if norm > c && norm > 0.0 => (c / norm) as f32,
            _ => 1.0,
        };
        self.t += 1;
        let c = self.config;
        let bias1 = 1.0 - libm::pow(c.beta1, self.t as f64);
        let bias2 = 1.0 - libm::pow(c.beta2, self.t as f64);
        let lr = (c.learning_rate * libm::sqrt(bias2) / bias1) as f32;
        let beta1 = c.beta1 as f32;
        let beta2 = c.beta2 as f32;
        let one_m_beta1 = 1.0 - beta1;
        let one_m_beta2 = 1.0 - beta2;
        let eps = c.epsilon as f32;
        let decay = c.weight_decay as f32;
        for (i, grad) in grads.iter_mut().enumerate() {
            let Some(grad) = grad else { continue };
            let target = params.tensor_mut(i);
            let it = target
                .data_mut()
                .iter_mut()
                .zip(grad.data().iter())
                .zip(self.m[i].data_mut().iter_mut())
                .zip(self.v[i].data_mut().iter_mut());
            for (((w, &g0), m), v) in it {
                let g = g0 * clip_scale + decay * *w;
                let mk = beta1 * *m + one_m_beta1 * g;
                let vk = beta2 * *v + one_m_beta2 * g * g;
                *m = mk;
                *v = vk;
                *w -= lr * mk / (fast_sqrt_f32(vk) + eps);
            }
        }
        norm
    }
}
