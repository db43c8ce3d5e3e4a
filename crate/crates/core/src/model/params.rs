//! Parameter containers for the score predictor.
//!
//! All trainable arrays hang off [`ParamTensors`]; [`ModelParams`] pairs
//! them with the encoder configuration and the target normalizer. Tensor
//! traversal order is load-bearing: `visit`/`visit_mut` walk the arrays in
//! one documented order, and the optimizer state, gradient checking, and
//! the on-disk checkpoint layout all index into that order.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::{EncoderConfig, ModelError, Normalizer};
use crate::rng::{stream_rng, streams};

/// Dense affine map. `weight` has shape `[out_dim, in_dim]`; rows of an
/// input batch are transformed as `x · weightᵀ + bias`.
#[derive(Debug, Clone)]
pub struct LinearParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearParams {
    fn xavier(out_dim: usize, in_dim: usize, rng: &mut ChaCha12Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-limit..limit)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// Per-feature scale and shift applied after row standardization.
#[derive(Debug, Clone)]
pub struct LayerNormParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl LayerNormParams {
    fn identity(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub wq: LinearParams,
    pub wk: LinearParams,
    pub wv: LinearParams,
    pub wo: LinearParams,
}

/// One pre-norm transformer block: `x + Attn(LN1(x))`, then `a + FFN(LN2(a))`.
#[derive(Debug, Clone)]
pub struct BlockParams {
    pub ln1: LayerNormParams,
    pub attn: AttentionParams,
    pub ln2: LayerNormParams,
    pub ffn1: LinearParams,
    pub ffn2: LinearParams,
}

/// One score-head block: linear, layer norm, GeLU.
#[derive(Debug, Clone)]
pub struct HeadBlockParams {
    pub linear: LinearParams,
    pub ln: LayerNormParams,
}

#[derive(Debug, Clone)]
pub struct HeadParams {
    pub blocks: Vec<HeadBlockParams>,
    pub out: LinearParams,
}

/// Every trainable array of the model, in one container so gradients can
/// mirror parameters shape-for-shape.
#[derive(Debug, Clone)]
pub struct ParamTensors {
    pub frontend: LinearParams,
    pub frontend_ln: LayerNormParams,
    pub blocks: Vec<BlockParams>,
    /// Learnable per-layer pooling weights `w` (length L).
    pub layer_weights: Array1<f64>,
    pub head: HeadParams,
}

/// Gradients mirror the parameter tensors exactly, shape for shape.
pub type GradientSet = ParamTensors;

/// Full model state: architecture, trainable tensors, and the target
/// normalizer fitted on the training labels.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub cfg: EncoderConfig,
    pub tensors: ParamTensors,
    pub normalizer: Normalizer,
}

impl ParamTensors {
    fn init(cfg: &EncoderConfig, rng: &mut ChaCha12Rng) -> Self {
        let d = cfg.hidden_dim;
        let blocks = (0..cfg.num_layers)
            .map(|_| BlockParams {
                ln1: LayerNormParams::identity(d),
                attn: AttentionParams {
                    wq: LinearParams::xavier(d, d, rng),
                    wk: LinearParams::xavier(d, d, rng),
                    wv: LinearParams::xavier(d, d, rng),
                    wo: LinearParams::xavier(d, d, rng),
                },
                ln2: LayerNormParams::identity(d),
                ffn1: LinearParams::xavier(cfg.ffn_dim, d, rng),
                ffn2: LinearParams::xavier(d, cfg.ffn_dim, rng),
            })
            .collect();
        let head = HeadParams {
            blocks: (0..cfg.head_blocks)
                .map(|_| HeadBlockParams {
                    linear: LinearParams::xavier(d, d, rng),
                    ln: LayerNormParams::identity(d),
                })
                .collect(),
            out: LinearParams::xavier(super::NUM_AXES, d, rng),
        };
        Self {
            frontend: LinearParams::xavier(d, cfg.frame_size, rng),
            frontend_ln: LayerNormParams::identity(d),
            blocks,
            layer_weights: Array1::from_elem(cfg.num_layers, 1.0 / cfg.num_layers as f64),
            head,
        }
    }

    /// Visit every trainable array in the canonical order. The order is a
    /// contract shared by the optimizer, gradient checking, and the
    /// checkpoint layout.
    pub fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        fn s(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        f("frontend.weight", s(&self.frontend.weight));
        f("frontend.bias", self.frontend.bias.as_slice().unwrap());
        f("frontend_ln.gamma", self.frontend_ln.gamma.as_slice().unwrap());
        f("frontend_ln.beta", self.frontend_ln.beta.as_slice().unwrap());
        for (l, b) in self.blocks.iter().enumerate() {
            let name = |part: &str| format!("blocks.{l}.{part}");
            f(&name("ln1.gamma"), b.ln1.gamma.as_slice().unwrap());
            f(&name("ln1.beta"), b.ln1.beta.as_slice().unwrap());
            for (tag, lin) in [
                ("attn.wq", &b.attn.wq),
                ("attn.wk", &b.attn.wk),
                ("attn.wv", &b.attn.wv),
                ("attn.wo", &b.attn.wo),
            ] {
                f(&name(&format!("{tag}.weight")), s(&lin.weight));
                f(&name(&format!("{tag}.bias")), lin.bias.as_slice().unwrap());
            }
            f(&name("ln2.gamma"), b.ln2.gamma.as_slice().unwrap());
            f(&name("ln2.beta"), b.ln2.beta.as_slice().unwrap());
            f(&name("ffn1.weight"), s(&b.ffn1.weight));
            f(&name("ffn1.bias"), b.ffn1.bias.as_slice().unwrap());
            f(&name("ffn2.weight"), s(&b.ffn2.weight));
            f(&name("ffn2.bias"), b.ffn2.bias.as_slice().unwrap());
        }
        f("layer_weights", self.layer_weights.as_slice().unwrap());
        for (i, hb) in self.head.blocks.iter().enumerate() {
            let name = |part: &str| format!("head.blocks.{i}.{part}");
            f(&name("linear.weight"), s(&hb.linear.weight));
            f(&name("linear.bias"), hb.linear.bias.as_slice().unwrap());
            f(&name("ln.gamma"), hb.ln.gamma.as_slice().unwrap());
            f(&name("ln.beta"), hb.ln.beta.as_slice().unwrap());
        }
        f("head.out.weight", s(&self.head.out.weight));
        f("head.out.bias", self.head.out.bias.as_slice().unwrap());
    }

    /// Mutable twin of [`visit`](Self::visit); identical order.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(
            "frontend.weight",
            self.frontend.weight.as_slice_mut().unwrap(),
        );
        f("frontend.bias", self.frontend.bias.as_slice_mut().unwrap());
        f(
            "frontend_ln.gamma",
            self.frontend_ln.gamma.as_slice_mut().unwrap(),
        );
        f(
            "frontend_ln.beta",
            self.frontend_ln.beta.as_slice_mut().unwrap(),
        );
        for (l, b) in self.blocks.iter_mut().enumerate() {
            let name = |part: &str| format!("blocks.{l}.{part}");
            f(&name("ln1.gamma"), b.ln1.gamma.as_slice_mut().unwrap());
            f(&name("ln1.beta"), b.ln1.beta.as_slice_mut().unwrap());
            for (tag, lin) in [
                ("attn.wq", &mut b.attn.wq),
                ("attn.wk", &mut b.attn.wk),
                ("attn.wv", &mut b.attn.wv),
                ("attn.wo", &mut b.attn.wo),
            ] {
                f(
                    &name(&format!("{tag}.weight")),
                    lin.weight.as_slice_mut().unwrap(),
                );
                f(
                    &name(&format!("{tag}.bias")),
                    lin.bias.as_slice_mut().unwrap(),
                );
            }
            f(&name("ln2.gamma"), b.ln2.gamma.as_slice_mut().unwrap());
            f(&name("ln2.beta"), b.ln2.beta.as_slice_mut().unwrap());
            f(&name("ffn1.weight"), b.ffn1.weight.as_slice_mut().unwrap());
            f(&name("ffn1.bias"), b.ffn1.bias.as_slice_mut().unwrap());
            f(&name("ffn2.weight"), b.ffn2.weight.as_slice_mut().unwrap());
            f(&name("ffn2.bias"), b.ffn2.bias.as_slice_mut().unwrap());
        }
        f(
            "layer_weights",
            self.layer_weights.as_slice_mut().unwrap(),
        );
        for (i, hb) in self.head.blocks.iter_mut().enumerate() {
            let name = |part: &str| format!("head.blocks.{i}.{part}");
            f(
                &name("linear.weight"),
                hb.linear.weight.as_slice_mut().unwrap(),
            );
            f(&name("linear.bias"), hb.linear.bias.as_slice_mut().unwrap());
            f(&name("ln.gamma"), hb.ln.gamma.as_slice_mut().unwrap());
            f(&name("ln.beta"), hb.ln.beta.as_slice_mut().unwrap());
        }
        f(
            "head.out.weight",
            self.head.out.weight.as_slice_mut().unwrap(),
        );
        f("head.out.bias", self.head.out.bias.as_slice_mut().unwrap());
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, v| n += v.len());
        n
    }

    /// Same shapes, every entry zero. Used for gradient accumulation.
    pub fn zeros_like(&self) -> Self {
        let mut copy = self.clone();
        copy.visit_mut(&mut |_, v| v.iter_mut().for_each(|x| *x = 0.0));
        copy
    }

    /// All entries concatenated in visit order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |_, v| out.extend_from_slice(v));
        out
    }

    /// Overwrite every entry from a flat vector laid out in visit order.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.num_params() {
            return Err(ModelError::InvalidConfig {
                detail: format!(
                    "flat parameter vector has {} entries, model has {}",
                    flat.len(),
                    self.num_params()
                ),
            });
        }
        let mut offset = 0;
        self.visit_mut(&mut |_, v| {
            v.copy_from_slice(&flat[offset..offset + v.len()]);
            offset += v.len();
        });
        Ok(())
    }

    /// Human-readable name of flat coordinate `idx`, e.g.
    /// `blocks.1.attn.wq.weight[37]`.
    pub fn coordinate_name(&self, idx: usize) -> String {
        let mut offset = 0;
        let mut found = None;
        self.visit(&mut |name, v| {
            if found.is_none() && idx < offset + v.len() {
                found = Some(format!("{name}[{}]", idx - offset));
            }
            offset += v.len();
        });
        found.unwrap_or_else(|| format!("<out of range: {idx}>"))
    }

    /// Global L2 norm over every entry.
    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        self.visit(&mut |_, v| sq += v.iter().map(|x| x * x).sum::<f64>());
        sq.sqrt()
    }

    /// Multiply every entry in place.
    pub fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |_, v| v.iter_mut().for_each(|x| *x *= factor));
    }

    /// Entry-wise `self += other`. Shapes must agree.
    pub fn add_assign(&mut self, other: &Self) {
        let flat = other.flatten();
        let mut offset = 0;
        self.visit_mut(&mut |_, v| {
            for x in v.iter_mut() {
                *x += flat[offset];
                offset += 1;
            }
        });
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, v| ok &= v.iter().all(|x| x.is_finite()));
        ok
    }
}

impl ModelParams {
    /// Fresh Xavier-initialized model. Layer-pooling weights start at 1/L,
    /// the normalizer at identity (training replaces it with corpus stats).
    pub fn init(cfg: &EncoderConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = stream_rng(seed, streams::MODEL_INIT);
        Ok(Self {
            cfg: *cfg,
            tensors: ParamTensors::init(cfg, &mut rng),
            normalizer: Normalizer::identity(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelParams {
        ModelParams::init(&EncoderConfig::tiny(), 7).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a = tiny().tensors.flatten();
        let b = tiny().tensors.flatten();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn visit_orders_agree() {
        let mut p = tiny().tensors;
        let mut names_ro = Vec::new();
        p.visit(&mut |n, v| names_ro.push((n.to_string(), v.len())));
        let mut names_rw = Vec::new();
        p.visit_mut(&mut |n, v| names_rw.push((n.to_string(), v.len())));
        assert_eq!(names_ro, names_rw);
        // Canonical order starts at the frontend and ends at the head.
        assert_eq!(names_ro.first().unwrap().0, "frontend.weight");
        assert_eq!(names_ro.last().unwrap().0, "head.out.bias");
        assert!(names_ro.iter().any(|(n, _)| n == "layer_weights"));
    }

    #[test]
    fn flatten_roundtrip() {
        let mut p = tiny().tensors;
        let flat = p.flatten();
        assert_eq!(flat.len(), p.num_params());
        let mut other = p.zeros_like();
        other.load_flat(&flat).unwrap();
        assert_eq!(other.flatten(), flat);
        // Wrong length is rejected.
        assert!(p.load_flat(&flat[1..]).is_err());
    }

    #[test]
    fn layer_weights_start_uniform() {
        let p = tiny();
        let l = p.cfg.num_layers as f64;
        for &w in p.tensors.layer_weights.iter() {
            assert_eq!(w, 1.0 / l);
        }
    }

    #[test]
    fn coordinate_names_resolve() {
        let p = tiny().tensors;
        assert_eq!(p.coordinate_name(0), "frontend.weight[0]");
        let last = p.num_params() - 1;
        assert_eq!(p.coordinate_name(last), "head.out.bias[3]");
        assert!(p.coordinate_name(p.num_params()).contains("out of range"));
    }

    #[test]
    fn zeros_like_and_arithmetic() {
        let p = tiny().tensors;
        let mut z = p.zeros_like();
        assert_eq!(z.global_norm(), 0.0);
        z.add_assign(&p);
        z.scale(2.0);
        let expect: Vec<f64> = p.flatten().iter().map(|x| 2.0 * x).collect();
        assert_eq!(z.flatten(), expect);
    }
}
