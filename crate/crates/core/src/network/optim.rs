//! Adam optimiser and cosine learning-rate schedule.

use super::NetworkParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    first: NetworkParams,
    second: NetworkParams,
    step: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        Self { first: params.zeros_like(), second: params.zeros_like(), step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

pub fn adam_step(params: &mut NetworkParams, state: &mut AdamState, grad: &NetworkParams, lr: f64) {
    state.step += 1;
    let c1 = 1.0 - BETA1.powi(state.step as i32);
    let c2 = 1.0 - BETA2.powi(state.step as i32);
    let moments = state.first.iter_mut().zip(state.second.iter_mut());
    for ((p, g), (m, v)) in params.iter_mut().zip(grad.iter()).zip(moments) {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
    }
}

/// Cosine decay from `lr_max` at step 0 to `lr_min` at `total_steps`.
pub fn cosine_lr(step: usize, total_steps: usize, lr_max: f64, lr_min: f64) -> f64 {
    if total_steps == 0 {
        return lr_max;
    }
    let frac = (step.min(total_steps) as f64) / total_steps as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}
