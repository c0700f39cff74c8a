use serde::{Deserialize, Serialize};

use super::{ModelParams, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update of one array. `step` is the 1-based count
/// including this update.
pub fn adam_update(param: &mut [f64], m: &mut [f64], v: &mut [f64], grad: &[f64], step: u64, lr: f64, cfg: &AdamConfig) {
    let bc1 = 1.0 - cfg.beta1.powf(step as f64);
    let bc2 = 1.0 - cfg.beta2.powf(step as f64);
    for k in 0..param.len() {
        let g = grad[k];
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[k] / bc1;
        let v_hat = v[k] / bc2;
        param[k] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

pub fn adam_step(params: &mut ModelParams, grads: &Weights, lr: f64, cfg: &AdamConfig) {
    params.adam.step += 1;
    let step = params.adam.step;
    let ModelParams { weights, adam, .. } = params;
    for (((p, m), v), g) in weights
        .arrays_mut()
        .into_iter()
        .zip(adam.m.arrays_mut())
        .zip(adam.v.arrays_mut())
        .zip(grads.arrays())
    {
        adam_update(p, m, v, g, step, lr, cfg);
    }
}
