//! Adam with bias correction.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.values().len();
        Self { first_moment: vec![0.0; n], second_moment: vec![0.0; n], step: 0 }
    }
}

/// One update: `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, config: &AdamConfig) -> Result<()> {
    let n = params.values().len();
    for len in [grads.values.len(), state.first_moment.len(), state.second_moment.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(config.beta1, t);
    let c2 = 1.0 - libm::pow(config.beta2, t);
    for (i, theta) in params.values_mut().iter_mut().enumerate() {
        let g = grads.values[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.eps);
    }
    if let Some(i) = params.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient(params.layout().path_of(i)));
    }
    Ok(())
}
