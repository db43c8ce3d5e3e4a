//! Training: the combined MAE + MSE objective, reverse-mode gradients for
//! every parameter (verified against finite differences), Adam with a
//! linear warmup/decay schedule, and the deterministic training loop.

mod adam;
mod backward;
mod grad_check;
mod run;

use thiserror::Error;

use crate::model::{ModelError, NUM_AXES};

pub use adam::{adam_step, lr_multiplier};
pub use backward::backward;
pub use grad_check::{grad_check, GradCheckReport};
pub use run::{train_continue, train_run, TrainLogRow, TrainOutcome, TrainingSet};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid training config: {detail}")]
    InvalidConfig { detail: String },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("corpus misaligned: {clips} clips vs {labels} labels")]
    Misaligned { clips: usize, labels: usize },
    #[error("loss became non-finite on batch sample {sample_index}")]
    NonFiniteLoss { sample_index: usize },
    #[error("model has {params} parameters; gradient checking is limited to {limit}")]
    ModelTooLarge { params: usize, limit: usize },
}

/// Optimization hyperparameters.
///
/// The defaults are tuned for the desk-scale model trained from scratch;
/// they are declared values, not published ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Clips per optimizer step.
    pub batch_size: usize,
    pub steps: u64,
    /// Steps of linear warmup; the remainder decays linearly to zero.
    pub warmup_steps: u64,
    pub seed: u64,
    /// Maximum audio fed per clip per step; longer clips contribute a
    /// random chunk of this length, redrawn every epoch.
    pub chunk_seconds: f64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Axes included in the loss. Training a single-axis model means
    /// masking the other three; the architecture keeps all four outputs.
    pub axes: [bool; NUM_AXES],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 8,
            steps: 2000,
            warmup_steps: 200,
            seed: 0,
            chunk_seconds: 10.0,
            grad_clip: Some(1.0),
            axes: [true; NUM_AXES],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |detail: String| Err(TrainError::InvalidConfig { detail });
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be > 0".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} must lie in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) {
            return fail("eps must be > 0".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if self.steps == 0 {
            return fail("steps must be >= 1".into());
        }
        if !(self.chunk_seconds > 0.0) {
            return fail("chunk_seconds must be > 0".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return fail("grad_clip must be > 0 when set".into());
            }
        }
        if !self.axes.iter().any(|&a| a) {
            return fail("at least one axis must be active".into());
        }
        Ok(())
    }
}

/// Per-sample objective in normalized-target space: summed over axes,
/// squared error plus absolute error,
///
/// ```text
/// loss = Σ_a (y_a − ŷ_a)² + |y_a − ŷ_a|
/// ```
///
/// Returns the total and the per-axis contributions.
pub fn loss_aes(pred: &[f64; NUM_AXES], target: &[f64; NUM_AXES]) -> (f64, [f64; NUM_AXES]) {
    let (loss, per_axis, _) = loss_aes_masked(pred, target, &[true; NUM_AXES]);
    (loss, per_axis)
}

/// Masked loss plus its gradient with respect to the prediction. The
/// absolute-error term uses subgradient 0 at an exactly-zero residual.
pub(crate) fn loss_aes_masked(
    pred: &[f64; NUM_AXES],
    target: &[f64; NUM_AXES],
    mask: &[bool; NUM_AXES],
) -> (f64, [f64; NUM_AXES], [f64; NUM_AXES]) {
    let mut total = 0.0;
    let mut per_axis = [0.0; NUM_AXES];
    let mut grad = [0.0; NUM_AXES];
    for a in 0..NUM_AXES {
        if !mask[a] {
            continue;
        }
        let r = pred[a] - target[a];
        per_axis[a] = r * r + r.abs();
        total += per_axis[a];
        grad[a] = 2.0 * r + r.signum();
        if r == 0.0 {
            grad[a] = 0.0;
        }
    }
    (total, per_axis, grad)
}
