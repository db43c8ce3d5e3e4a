//! The aesthetics score predictor.
//!
//! Architecture, input to output: a linear frame frontend with layer
//! normalization, fixed sinusoidal positional encodings, a stack of
//! pre-norm transformer encoder blocks, layer-weighted time pooling into a
//! unit-norm clip embedding, and an MLP head emitting the four axis scores
//! in normalized-target space.
//!
//! The pooling stage is the characteristic piece: every transformer
//! layer's hidden states are combined with learnable scalar weights,
//!
//! ```text
//! z_l = w_l / Σ_l' w_l'                 (weight normalization)
//! ê   = (1/T) Σ_t Σ_l z_l · h_{l,t}     (layer-and-time average)
//! e   = ê / ‖ê‖₂                        (unit embedding)
//! ```
//!
//! after which the MLP head maps `e` to the four scores and the
//! [`Normalizer`] maps them back to label space.

mod checkpoint;
mod forward;
mod params;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scores::{AesScores, Axis};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, TrainState};
pub use forward::{
    frontend_frames, mlp_forward, positional_encoding, transformer_forward,
};
pub(crate) use forward::{forward_traced, gelu_prime, BlockTrace, LnCache, SampleTrace};
pub use params::{
    AttentionParams, BlockParams, GradientSet, HeadBlockParams, HeadParams, LayerNormParams,
    LinearParams, ModelParams, ParamTensors,
};

/// Number of aesthetics axes the model predicts.
pub const NUM_AXES: usize = 4;

/// Guard below which a layer-weight sum or embedding norm counts as
/// degenerate.
pub const DEGENERACY_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid encoder config: {detail}")]
    InvalidConfig { detail: String },
    #[error("layer weights are degenerate: |sum| = {sum_abs:e} <= 1e-8")]
    DegenerateLayerWeights { sum_abs: f64 },
    #[error("pooled embedding is degenerate: norm = {norm:e} <= 1e-8")]
    DegenerateEmbedding { norm: f64 },
    #[error("input spans {frames} frames, exceeding the model limit of {max_frames}; window the clip first")]
    TooManyFrames { frames: usize, max_frames: usize },
    #[error("axis {axis} has zero variance in the training targets")]
    ZeroVarianceAxis { axis: Axis },
    #[error("need at least {needed} labeled samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite values produced at stage `{stage}`")]
    NonFinite { stage: &'static str },
}

/// Numeric mode for the forward pass.
///
/// `F64` is the default and the only mode permitted in training and
/// gradient checking. `F32` rounds activations to 32-bit precision between
/// operations (accumulations still run in 64-bit) for single-precision
/// inference experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Transformer depth L.
    pub num_layers: usize,
    /// Model width d.
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    /// Samples per input frame.
    pub frame_size: usize,
    /// Hop between consecutive frames, in samples.
    pub frame_stride: usize,
    /// Upper bound on frames per forward pass; longer audio must be
    /// windowed by the caller.
    pub max_frames: usize,
    /// Number of (linear, layer norm, GeLU) blocks before the final
    /// 4-way output projection.
    pub head_blocks: usize,
    #[serde(default)]
    pub precision: Precision,
}

impl EncoderConfig {
    /// Desk-scale default: small enough to train from scratch on a CPU.
    pub fn desk() -> Self {
        Self {
            num_layers: 4,
            hidden_dim: 64,
            num_heads: 4,
            ffn_dim: 128,
            frame_size: 400,
            frame_stride: 320,
            max_frames: 512,
            head_blocks: 2,
            precision: Precision::F64,
        }
    }

    /// Full-scale preset (12 layers, 768 wide). Provided as a config
    /// preset only; training it from scratch is far beyond desk scale.
    pub fn full() -> Self {
        Self {
            num_layers: 12,
            hidden_dim: 768,
            num_heads: 12,
            ffn_dim: 3072,
            frame_size: 400,
            frame_stride: 320,
            max_frames: 512,
            head_blocks: 2,
            precision: Precision::F64,
        }
    }

    /// Miniature model for gradient checking and fast tests.
    pub fn tiny() -> Self {
        Self {
            num_layers: 2,
            hidden_dim: 16,
            num_heads: 2,
            ffn_dim: 32,
            frame_size: 8,
            frame_stride: 4,
            max_frames: 64,
            head_blocks: 1,
            precision: Precision::F64,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |detail: String| Err(ModelError::InvalidConfig { detail });
        if self.num_layers == 0 {
            return fail("num_layers must be >= 1".into());
        }
        if self.hidden_dim == 0 || self.num_heads == 0 {
            return fail("hidden_dim and num_heads must be >= 1".into());
        }
        if self.hidden_dim % self.num_heads != 0 {
            return fail(format!(
                "hidden_dim {} not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            ));
        }
        if self.ffn_dim == 0 {
            return fail("ffn_dim must be >= 1".into());
        }
        if self.frame_size == 0 || self.frame_stride == 0 {
            return fail("frame_size and frame_stride must be >= 1".into());
        }
        if self.frame_stride > self.frame_size {
            return fail(format!(
                "frame_stride {} exceeds frame_size {}",
                self.frame_stride, self.frame_size
            ));
        }
        if self.max_frames == 0 {
            return fail("max_frames must be >= 1".into());
        }
        Ok(())
    }

    /// Frame count for a waveform of `len` samples (zero-padding inputs
    /// shorter than one frame).
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.frame_size {
            1
        } else {
            1 + (len - self.frame_size) / self.frame_stride
        }
    }
}

/// Hidden states of every transformer layer: L matrices of shape `[T, d]`.
#[derive(Debug, Clone)]
pub struct HiddenStack {
    pub states: Vec<ndarray::Array2<f64>>,
}

impl HiddenStack {
    pub fn num_layers(&self) -> usize {
        self.states.len()
    }

    pub fn frames(&self) -> usize {
        self.states.first().map_or(0, |s| s.nrows())
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.ncols())
    }

    pub fn is_finite(&self) -> bool {
        self.states
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }
}

/// Per-axis mean/std of the training targets; predictions are produced in
/// normalized space and mapped back through this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; NUM_AXES],
    pub std: [f64; NUM_AXES],
}

impl Normalizer {
    /// mean 0, std 1 on every axis: normalization is the identity.
    pub fn identity() -> Self {
        Self {
            mean: [0.0; NUM_AXES],
            std: [1.0; NUM_AXES],
        }
    }

    /// Population mean/std per axis over the given labels.
    pub fn fit(labels: &[AesScores]) -> Result<Self, ModelError> {
        Self::fit_masked(labels, &[true; NUM_AXES])
    }

    /// Like [`fit`](Self::fit), but axes with `mask` false keep identity
    /// stats and are exempt from the variance requirement (used when
    /// training single-axis models).
    pub fn fit_masked(labels: &[AesScores], mask: &[bool; NUM_AXES]) -> Result<Self, ModelError> {
        if labels.len() < 2 {
            return Err(ModelError::TooFewSamples {
                needed: 2,
                got: labels.len(),
            });
        }
        let n = labels.len() as f64;
        let mut out = Self::identity();
        for axis in Axis::ALL {
            let i = axis.index();
            if !mask[i] {
                continue;
            }
            let mean = labels.iter().map(|s| s.axis(axis)).sum::<f64>() / n;
            let var = labels
                .iter()
                .map(|s| (s.axis(axis) - mean).powi(2))
                .sum::<f64>()
                / n;
            if var <= 0.0 {
                return Err(ModelError::ZeroVarianceAxis { axis });
            }
            out.mean[i] = mean;
            out.std[i] = var.sqrt();
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, &s) in self.std.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() || !self.mean[i].is_finite() {
                return Err(ModelError::InvalidConfig {
                    detail: format!("normalizer stats invalid on axis {}", Axis::ALL[i]),
                });
            }
        }
        Ok(())
    }

    pub fn normalize(&self, scores: &AesScores) -> [f64; NUM_AXES] {
        let y = scores.to_array();
        std::array::from_fn(|i| (y[i] - self.mean[i]) / self.std[i])
    }

    pub fn denormalize(&self, raw: [f64; NUM_AXES]) -> AesScores {
        AesScores::from_array(std::array::from_fn(|i| {
            raw[i] * self.std[i] + self.mean[i]
        }))
    }
}

/// Normalize the layer-pooling weights: `z_l = w_l / Σ w_l`.
///
/// Fails when the sum is within `1e-8` of zero — the published form of the
/// equation divides by the raw sum, so near-cancelling weights are a
/// genuine degeneracy rather than something to silently repair.
pub fn layer_weight_normalize(w: &Array1<f64>) -> Result<Array1<f64>, ModelError> {
    let sum: f64 = w.iter().sum();
    if sum.abs() <= DEGENERACY_EPS {
        return Err(ModelError::DegenerateLayerWeights { sum_abs: sum.abs() });
    }
    Ok(w.mapv(|x| x / sum))
}

/// Pool the hidden stack over layers and time: `ê = (1/T) Σ_t Σ_l z_l h_{l,t}`.
pub fn aggregate_embedding(stack: &HiddenStack, z: &Array1<f64>) -> Array1<f64> {
    assert_eq!(
        stack.num_layers(),
        z.len(),
        "layer weights must match stack depth"
    );
    let t = stack.frames();
    let d = stack.dim();
    let mut e_hat = Array1::<f64>::zeros(d);
    for (state, &zl) in stack.states.iter().zip(z.iter()) {
        // Σ_t h_{l,t} first, then one scale: same result, fewer passes.
        for row in state.rows() {
            for (acc, &v) in e_hat.iter_mut().zip(row.iter()) {
                *acc += zl * v;
            }
        }
    }
    e_hat.mapv_inplace(|x| x / t as f64);
    e_hat
}

/// Scale the pooled embedding to unit L2 norm: `e = ê / ‖ê‖₂`.
pub fn l2_normalize(e_hat: &Array1<f64>) -> Result<Array1<f64>, ModelError> {
    let norm = e_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= DEGENERACY_EPS {
        return Err(ModelError::DegenerateEmbedding { norm });
    }
    Ok(e_hat.mapv(|x| x / norm))
}

/// Fit a normalizer to training labels and map them into normalized space.
pub fn normalize_targets(
    labels: &[AesScores],
) -> Result<(Normalizer, Vec<[f64; NUM_AXES]>), ModelError> {
    let norm = Normalizer::fit(labels)?;
    let targets = labels.iter().map(|s| norm.normalize(s)).collect();
    Ok((norm, targets))
}

/// Map raw model outputs back to label space: `y_a = raw_a · std_a + mean_a`.
pub fn denormalize_scores(raw: [f64; NUM_AXES], norm: &Normalizer) -> AesScores {
    norm.denormalize(raw)
}

/// Score one conditioned waveform (mono 16 kHz, at most one window long).
///
/// Composition of the full pipeline: frontend, positional encoding,
/// transformer, layer-weight pooling, unit normalization, MLP head,
/// denormalization.
pub fn predict(waveform: &[f64], params: &ModelParams) -> Result<AesScores, ModelError> {
    let frames = frontend_frames(waveform, params);
    let pe = positional_encoding(frames.nrows(), frames.ncols());
    let stack = transformer_forward(&(&frames + &pe), params)?;
    let z = layer_weight_normalize(&params.tensors.layer_weights)?;
    let e = l2_normalize(&aggregate_embedding(&stack, &z))?;
    let raw = forward::mlp_forward_with(&e, &params.tensors.head, params.cfg.precision);
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite { stage: "head" });
    }
    Ok(denormalize_scores(raw, &params.normalizer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::desk().validate().is_ok());
        assert!(EncoderConfig::full().validate().is_ok());
        assert!(EncoderConfig::tiny().validate().is_ok());
        let mut bad = EncoderConfig::desk();
        bad.hidden_dim = 65; // not divisible by 4 heads
        assert!(bad.validate().is_err());
        let mut bad = EncoderConfig::desk();
        bad.frame_stride = 500;
        assert!(bad.validate().is_err());
        let mut bad = EncoderConfig::desk();
        bad.num_layers = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn layer_weight_normalize_examples() {
        let z = layer_weight_normalize(&ndarray::arr1(&[1.0, 1.0, 1.0])).unwrap();
        for &v in z.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let z = layer_weight_normalize(&ndarray::arr1(&[1.0, 2.0, 1.0])).unwrap();
        assert_eq!(z.to_vec(), vec![0.25, 0.5, 0.25]);
        // Zero-sum weights are rejected.
        let err = layer_weight_normalize(&ndarray::arr1(&[1.0, -1.0])).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateLayerWeights { .. }));
    }

    #[test]
    fn layer_weight_sum_is_one() {
        let mut rng = stream_rng(11, 99);
        for _ in 0..200 {
            let w =
                Array1::from_shape_fn(4, |_| rng.random_range(-2.0..2.0f64));
            match layer_weight_normalize(&w) {
                Ok(z) => {
                    let s: f64 = z.iter().sum();
                    assert!((s - 1.0).abs() <= 1e-12, "sum drifted: {s}");
                }
                Err(_) => assert!(w.iter().sum::<f64>().abs() <= DEGENERACY_EPS),
            }
        }
    }

    #[test]
    fn aggregate_embedding_constant_stack() {
        // With Σz = 1 and every hidden state equal to c, pooling returns c.
        let c = ndarray::arr1(&[1.5, -2.0, 0.25]);
        let states = (0..2)
            .map(|_| {
                let mut m = Array2::zeros((4, 3));
                for mut row in m.rows_mut() {
                    row.assign(&c);
                }
                m
            })
            .collect();
        let stack = HiddenStack { states };
        let z = ndarray::arr1(&[0.3, 0.7]);
        let e_hat = aggregate_embedding(&stack, &z);
        for (a, b) in e_hat.iter().zip(c.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn aggregate_embedding_forced_arithmetic() {
        let states = vec![
            ndarray::arr2(&[[1.0, 0.0]]),
            ndarray::arr2(&[[0.0, 1.0]]),
        ];
        let stack = HiddenStack { states };
        let e_hat = aggregate_embedding(&stack, &ndarray::arr1(&[0.5, 0.5]));
        assert_eq!(e_hat.to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn l2_normalize_examples() {
        let e = l2_normalize(&ndarray::arr1(&[3.0, 4.0])).unwrap();
        assert!((e[0] - 0.6).abs() < 1e-15);
        assert!((e[1] - 0.8).abs() < 1e-15);
        // Unit input is a fixed point.
        let u = ndarray::arr1(&[0.6, 0.8]);
        let e = l2_normalize(&u).unwrap();
        assert!((e[0] - 0.6).abs() < 1e-12 && (e[1] - 0.8).abs() < 1e-12);
        // Zero vector is rejected.
        assert!(matches!(
            l2_normalize(&ndarray::arr1(&[0.0, 0.0])),
            Err(ModelError::DegenerateEmbedding { .. })
        ));
    }

    #[test]
    fn normalizer_moments_and_roundtrip() {
        let labels = vec![
            AesScores::new(2.0, 5.0, 7.0, 3.0),
            AesScores::new(4.0, 6.0, 2.0, 8.0),
            AesScores::new(6.0, 4.0, 9.0, 5.0),
        ];
        let (norm, targets) = normalize_targets(&labels).unwrap();
        // PQ targets {2,4,6}: population mean 4, std sqrt(8/3).
        assert!((norm.mean[0] - 4.0).abs() < 1e-12);
        assert!((norm.std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((targets[0][0] + 1.224_744_871_391_589).abs() < 1e-12);
        assert!(targets[1][0].abs() < 1e-12);
        for axis in 0..NUM_AXES {
            let mean: f64 = targets.iter().map(|t| t[axis]).sum::<f64>() / 3.0;
            let var: f64 = targets.iter().map(|t| t[axis].powi(2)).sum::<f64>() / 3.0
                - mean * mean;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        for label in &labels {
            let back = norm.denormalize(norm.normalize(label));
            for (a, b) in back.to_array().iter().zip(label.to_array().iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalizer_rejects_degenerate_input() {
        let one = vec![AesScores::new(5.0, 5.0, 5.0, 5.0)];
        assert!(matches!(
            Normalizer::fit(&one),
            Err(ModelError::TooFewSamples { .. })
        ));
        let flat = vec![
            AesScores::new(5.0, 1.0, 2.0, 3.0),
            AesScores::new(5.0, 2.0, 3.0, 4.0),
        ];
        match Normalizer::fit(&flat) {
            Err(ModelError::ZeroVarianceAxis { axis }) => assert_eq!(axis, Axis::PQ),
            other => panic!("expected zero-variance error, got {other:?}"),
        }
    }

    #[test]
    fn denormalize_examples() {
        let norm = Normalizer {
            mean: [6.0, 3.0, 7.0, 5.0],
            std: [1.0, 1.0, 1.0, 1.0],
        };
        let s = denormalize_scores([0.0; 4], &norm);
        assert_eq!(s.to_array(), [6.0, 3.0, 7.0, 5.0]);
        let norm = Normalizer {
            mean: [4.0; 4],
            std: [2.0; 4],
        };
        let s = denormalize_scores([1.0; 4], &norm);
        assert_eq!(s.to_array(), [6.0; 4]);
    }
}
