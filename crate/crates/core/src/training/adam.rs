//! Adam with bias correction and a linear warmup / linear decay learning
//! rate schedule. Optimizer state lives in [`TrainState`] so a resumed
//! run continues the exact trajectory of an uninterrupted one.

use crate::model::{GradientSet, ParamTensors, TrainState};

use super::TrainConfig;

/// Schedule multiplier for 1-based `step`: linear ramp over
/// `warmup` steps, then linear decay to zero at `total`, clamped at 0.
pub fn lr_multiplier(step: u64, warmup: u64, total: u64) -> f64 {
    if warmup > 0 && step <= warmup {
        return step as f64 / warmup as f64;
    }
    if total <= warmup {
        return 1.0;
    }
    let remaining = total.saturating_sub(step) as f64;
    (remaining / (total - warmup) as f64).max(0.0)
}

/// Apply one Adam update in place and return the effective learning rate
/// used. Increments `state.step` first, so moment bias correction sees
/// the 1-based step count.
///
/// With `m̂ = m/(1−β₁ᵗ)` and `v̂ = v/(1−β₂ᵗ)` the update is
/// `p ← p − lr·m̂/(√v̂ + ε)`; note ε sits outside the square root.
pub fn adam_step(
    tensors: &mut ParamTensors,
    grads: &GradientSet,
    state: &mut TrainState,
    cfg: &TrainConfig,
) -> f64 {
    state.step += 1;
    let t = state.step;
    let lr = cfg.learning_rate * lr_multiplier(t, cfg.warmup_steps, cfg.steps);

    let mut flat = tensors.flatten();
    let g = grads.flatten();
    assert_eq!(flat.len(), g.len(), "gradient/parameter length mismatch");
    assert_eq!(flat.len(), state.m.len(), "optimizer state length mismatch");

    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..flat.len() {
        let gi = g[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        flat[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    tensors
        .load_flat(&flat)
        .expect("flatten/load_flat round-trip cannot change length");
    lr
}
