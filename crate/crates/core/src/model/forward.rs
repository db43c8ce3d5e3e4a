//! Forward pass: framing, frontend, positional encoding, transformer
//! blocks, and the MLP head.
//!
//! Two entry styles share the same primitives. The public stage functions
//! ([`frontend_frames`], [`transformer_forward`], [`mlp_forward`]) compute
//! activations and discard intermediates; [`forward_traced`] retains every
//! intermediate the training module needs for backpropagation, so the two
//! paths cannot drift apart numerically.

use ndarray::{s, Array1, Array2, Axis as NdAxis};

use super::params::{BlockParams, HeadParams, LayerNormParams, LinearParams};
use super::{
    aggregate_embedding, layer_weight_normalize, EncoderConfig, HiddenStack, ModelError,
    ModelParams, Precision, DEGENERACY_EPS, NUM_AXES,
};

/// Variance stabilizer inside layer normalization.
pub(crate) const LN_EPS: f64 = 1e-5;

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

pub(crate) fn linear_forward(x: &Array2<f64>, p: &LinearParams) -> Array2<f64> {
    x.dot(&p.weight.t()) + &p.bias
}

/// Row-wise layer normalization cache: standardized rows and the
/// reciprocal standard deviation per row.
pub(crate) struct LnCache {
    pub xhat: Array2<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm_forward(
    x: &Array2<f64>,
    p: &LayerNormParams,
) -> (Array2<f64>, LnCache) {
    let (t, d) = x.dim();
    let mut xhat = Array2::<f64>::zeros((t, d));
    let mut out = Array2::<f64>::zeros((t, d));
    let mut rstd = vec![0.0; t];
    for i in 0..t {
        let row = x.row(i);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        for j in 0..d {
            let h = (x[[i, j]] - mean) * r;
            xhat[[i, j]] = h;
            out[[i, j]] = h * p.gamma[j] + p.beta[j];
        }
    }
    (out, LnCache { xhat, rstd })
}

/// GeLU in the tanh parameterization, which has an exact closed-form
/// derivative (see [`gelu_prime`]) so analytic gradients match finite
/// differences to machine precision.
pub(crate) fn gelu(x: f64) -> f64 {
    const C: f64 = 0.044715;
    let s = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (s * (x + C * x * x * x)).tanh())
}

pub(crate) fn gelu_prime(x: f64) -> f64 {
    const C: f64 = 0.044715;
    let s = (2.0 / std::f64::consts::PI).sqrt();
    let th = (s * (x + C * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * s * (1.0 + 3.0 * C * x * x)
}

pub(crate) fn softmax_rows_inplace(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Round every activation through 32-bit precision when the config asks
/// for single-precision inference; no-op in the default 64-bit mode.
fn quantize(m: &mut Array2<f64>, precision: Precision) {
    if precision == Precision::F32 {
        m.mapv_inplace(|x| x as f32 as f64);
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Slice a waveform into overlapping frames of `frame_size` samples every
/// `frame_stride`. Inputs shorter than one frame are zero-padded to a
/// single frame; trailing samples that do not fill a frame are dropped.
pub(crate) fn frame_waveform(waveform: &[f64], cfg: &EncoderConfig) -> Array2<f64> {
    let t = cfg.frame_count(waveform.len());
    let mut frames = Array2::<f64>::zeros((t, cfg.frame_size));
    for i in 0..t {
        let start = i * cfg.frame_stride;
        let take = cfg.frame_size.min(waveform.len().saturating_sub(start));
        for j in 0..take {
            frames[[i, j]] = waveform[start + j];
        }
    }
    frames
}

/// Frontend: frame the waveform, project each frame to `d` dimensions,
/// and layer-normalize. Positional encodings are *not* added here.
pub fn frontend_frames(waveform: &[f64], params: &ModelParams) -> Array2<f64> {
    let frames = frame_waveform(waveform, &params.cfg);
    let mut proj = linear_forward(&frames, &params.tensors.frontend);
    quantize(&mut proj, params.cfg.precision);
    let (mut out, _) = layer_norm_forward(&proj, &params.tensors.frontend_ln);
    quantize(&mut out, params.cfg.precision);
    out
}

/// Fixed sinusoidal positional encodings, shape `[t, d]`:
/// `pe[pos, 2i] = sin(pos·ω_i)`, `pe[pos, 2i+1] = cos(pos·ω_i)` with
/// `ω_i = 10000^(−2i/d)`.
pub fn positional_encoding(t: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::<f64>::zeros((t, d));
    for pos in 0..t {
        for i in 0..d.div_ceil(2) {
            let omega = 10_000f64.powf(-2.0 * i as f64 / d as f64);
            let angle = pos as f64 * omega;
            pe[[pos, 2 * i]] = angle.sin();
            if 2 * i + 1 < d {
                pe[[pos, 2 * i + 1]] = angle.cos();
            }
        }
    }
    pe
}

struct AttnOut {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Per-head softmax attention weights, each `[T, T]`.
    weights: Vec<Array2<f64>>,
    /// Concatenated head outputs, before the output projection.
    ctx: Array2<f64>,
    out: Array2<f64>,
}

fn attention_forward(
    ln1_out: &Array2<f64>,
    b: &BlockParams,
    num_heads: usize,
) -> AttnOut {
    let (t, d) = ln1_out.dim();
    let dh = d / num_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear_forward(ln1_out, &b.attn.wq);
    let k = linear_forward(ln1_out, &b.attn.wk);
    let v = linear_forward(ln1_out, &b.attn.wv);
    let mut ctx = Array2::<f64>::zeros((t, d));
    let mut weights = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);
        let mut scores = qh.dot(&kh.t());
        scores.mapv_inplace(|x| x * scale);
        softmax_rows_inplace(&mut scores);
        ctx.slice_mut(cols).assign(&scores.dot(&vh));
        weights.push(scores);
    }
    let out = linear_forward(&ctx, &b.attn.wo);
    AttnOut {
        q,
        k,
        v,
        weights,
        ctx,
        out,
    }
}

/// Everything the backward pass needs from one transformer block.
pub(crate) struct BlockTrace {
    pub ln1: LnCache,
    pub ln1_out: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    pub attn_weights: Vec<Array2<f64>>,
    pub ctx: Array2<f64>,
    pub ln2: LnCache,
    pub ln2_out: Array2<f64>,
    pub ffn_pre: Array2<f64>,
    pub ffn_act: Array2<f64>,
}

fn block_forward_traced(
    x: &Array2<f64>,
    b: &BlockParams,
    num_heads: usize,
) -> (Array2<f64>, BlockTrace) {
    let (ln1_out, ln1) = layer_norm_forward(x, &b.ln1);
    let attn = attention_forward(&ln1_out, b, num_heads);
    let a = x + &attn.out;
    let (ln2_out, ln2) = layer_norm_forward(&a, &b.ln2);
    let ffn_pre = linear_forward(&ln2_out, &b.ffn1);
    let ffn_act = ffn_pre.mapv(gelu);
    let out = &a + &linear_forward(&ffn_act, &b.ffn2);
    let trace = BlockTrace {
        ln1,
        ln1_out,
        q: attn.q,
        k: attn.k,
        v: attn.v,
        attn_weights: attn.weights,
        ctx: attn.ctx,
        ln2,
        ln2_out,
        ffn_pre,
        ffn_act,
    };
    (out, trace)
}

/// Run the transformer stack on frontend output (with positional encoding
/// already applied by the caller) and return every layer's hidden states.
pub fn transformer_forward(
    frames: &Array2<f64>,
    params: &ModelParams,
) -> Result<HiddenStack, ModelError> {
    let cfg = &params.cfg;
    let t = frames.nrows();
    if t > cfg.max_frames {
        return Err(ModelError::TooManyFrames {
            frames: t,
            max_frames: cfg.max_frames,
        });
    }
    assert_eq!(frames.ncols(), cfg.hidden_dim, "frame width must equal d");
    let mut states = Vec::with_capacity(cfg.num_layers);
    let mut x = frames.clone();
    quantize(&mut x, cfg.precision);
    for b in &params.tensors.blocks {
        let (mut out, _) = block_forward_traced(&x, b, cfg.num_heads);
        quantize(&mut out, cfg.precision);
        states.push(out.clone());
        x = out;
    }
    Ok(HiddenStack { states })
}

/// MLP head: `head_blocks` rounds of linear → layer norm → GeLU, then a
/// final linear map to the four normalized-space scores.
pub fn mlp_forward(e: &Array1<f64>, head: &HeadParams) -> [f64; NUM_AXES] {
    mlp_forward_with(e, head, Precision::F64)
}

pub(crate) fn mlp_forward_with(
    e: &Array1<f64>,
    head: &HeadParams,
    precision: Precision,
) -> [f64; NUM_AXES] {
    let mut x = e.view().insert_axis(NdAxis(0)).to_owned();
    for hb in &head.blocks {
        let lin = linear_forward(&x, &hb.linear);
        let (ln_out, _) = layer_norm_forward(&lin, &hb.ln);
        x = ln_out.mapv(gelu);
        quantize(&mut x, precision);
    }
    let mut raw = linear_forward(&x, &head.out);
    quantize(&mut raw, precision);
    std::array::from_fn(|i| raw[[0, i]])
}

// ---------------------------------------------------------------------------
// Traced forward for training
// ---------------------------------------------------------------------------

pub(crate) struct HeadBlockTrace {
    /// Input to the block's linear map, shape `[1, d]`.
    pub x_in: Array2<f64>,
    pub ln: LnCache,
    /// Layer-norm output (the GeLU input), shape `[1, d]`.
    pub ln_out: Array2<f64>,
}

/// Every intermediate of one sample's forward pass, retained for
/// backpropagation.
pub(crate) struct SampleTrace {
    pub frames: Array2<f64>,
    pub front_ln: LnCache,
    /// Block-1 input: frontend output plus positional encoding.
    pub x0: Array2<f64>,
    pub blocks: Vec<BlockTrace>,
    pub stack: HiddenStack,
    pub z: Array1<f64>,
    pub w_sum: f64,
    pub e_norm: f64,
    pub e: Array1<f64>,
    pub head_blocks: Vec<HeadBlockTrace>,
    /// Input to the final output projection, shape `[1, d]`.
    pub head_final_in: Array2<f64>,
    pub raw: [f64; NUM_AXES],
}

impl SampleTrace {
    pub fn frame_count(&self) -> usize {
        self.x0.nrows()
    }
}

/// Full forward pass keeping all caches. Training-only; requires the
/// 64-bit numeric mode so gradients match finite differences.
pub(crate) fn forward_traced(
    waveform: &[f64],
    params: &ModelParams,
) -> Result<SampleTrace, ModelError> {
    if params.cfg.precision != Precision::F64 {
        return Err(ModelError::InvalidConfig {
            detail: "training and gradient checks require the f64 numeric mode".into(),
        });
    }
    let cfg = &params.cfg;
    let frames = frame_waveform(waveform, cfg);
    let t = frames.nrows();
    if t > cfg.max_frames {
        return Err(ModelError::TooManyFrames {
            frames: t,
            max_frames: cfg.max_frames,
        });
    }
    let proj = linear_forward(&frames, &params.tensors.frontend);
    let (front_out, front_ln) = layer_norm_forward(&proj, &params.tensors.frontend_ln);
    let x0 = &front_out + &positional_encoding(t, cfg.hidden_dim);

    let mut blocks = Vec::with_capacity(cfg.num_layers);
    let mut states = Vec::with_capacity(cfg.num_layers);
    let mut x = x0.clone();
    for b in &params.tensors.blocks {
        let (out, trace) = block_forward_traced(&x, b, cfg.num_heads);
        blocks.push(trace);
        states.push(out.clone());
        x = out;
    }
    let stack = HiddenStack { states };

    let w_sum: f64 = params.tensors.layer_weights.iter().sum();
    let z = layer_weight_normalize(&params.tensors.layer_weights)?;
    let e_hat = aggregate_embedding(&stack, &z);
    let e_norm = e_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
    if e_norm <= DEGENERACY_EPS {
        return Err(ModelError::DegenerateEmbedding { norm: e_norm });
    }
    let e = e_hat.mapv(|x| x / e_norm);

    let mut head_blocks = Vec::with_capacity(params.tensors.head.blocks.len());
    let mut hx = e.view().insert_axis(NdAxis(0)).to_owned();
    for hb in &params.tensors.head.blocks {
        let lin = linear_forward(&hx, &hb.linear);
        let (ln_out, ln) = layer_norm_forward(&lin, &hb.ln);
        let next = ln_out.mapv(gelu);
        head_blocks.push(HeadBlockTrace {
            x_in: hx,
            ln,
            ln_out,
        });
        hx = next;
    }
    let raw_mat = linear_forward(&hx, &params.tensors.head.out);
    let raw = std::array::from_fn(|i| raw_mat[[0, i]]);

    Ok(SampleTrace {
        frames,
        front_ln,
        x0,
        blocks,
        stack,
        z,
        w_sum,
        e_norm,
        e,
        head_blocks,
        head_final_in: hx,
        raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{predict, Normalizer};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn tiny_model(seed: u64) -> ModelParams {
        ModelParams::init(&EncoderConfig::tiny(), seed).unwrap()
    }

    fn random_wave(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 1234);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn frame_count_examples() {
        let cfg = EncoderConfig::desk();
        assert_eq!(cfg.frame_count(400), 1);
        assert_eq!(cfg.frame_count(1040), 3);
        assert_eq!(cfg.frame_count(0), 1); // zero-padded
        assert_eq!(cfg.frame_count(399), 1);
        assert_eq!(cfg.frame_count(401), 1); // leftover tail dropped
        assert_eq!(cfg.frame_count(720), 2);
    }

    #[test]
    fn zero_waveform_gives_normalized_bias_rows() {
        let mut params = tiny_model(3);
        // Give the bias some structure so the check is non-trivial.
        for (i, b) in params.tensors.frontend.bias.iter_mut().enumerate() {
            *b = i as f64 * 0.1 - 0.4;
        }
        let frames = frontend_frames(&vec![0.0; 6], &params);
        assert_eq!(frames.nrows(), 1);
        // Expected: layer norm of the bias vector.
        let bias = params
            .tensors
            .frontend
            .bias
            .view()
            .insert_axis(NdAxis(0))
            .to_owned();
        let (expect, _) = layer_norm_forward(&bias, &params.tensors.frontend_ln);
        for (a, b) in frames.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn transformer_shape_contract_and_determinism() {
        let params = tiny_model(5);
        let frames = Array2::from_shape_fn((5, 16), |(i, j)| ((i * 31 + j) as f64).sin());
        let s1 = transformer_forward(&frames, &params).unwrap();
        let s2 = transformer_forward(&frames, &params).unwrap();
        assert_eq!(s1.num_layers(), 2);
        assert_eq!(s1.frames(), 5);
        assert_eq!(s1.dim(), 16);
        assert!(s1.is_finite());
        for (a, b) in s1.states.iter().zip(s2.states.iter()) {
            assert_eq!(a, b, "forward must be bitwise deterministic");
        }
    }

    #[test]
    fn transformer_rejects_overlong_input() {
        let params = tiny_model(5);
        let frames = Array2::<f64>::zeros((params.cfg.max_frames + 1, 16));
        assert!(matches!(
            transformer_forward(&frames, &params),
            Err(ModelError::TooManyFrames { .. })
        ));
    }

    #[test]
    fn unmasked_attention_is_permutation_equivariant() {
        // Without positional encodings, self-attention treats frames as a
        // set: permuting input rows permutes output rows identically.
        let params = tiny_model(8);
        let frames = Array2::from_shape_fn((6, 16), |(i, j)| ((i * 7 + j * 3) as f64 * 0.37).cos());
        let perm = [4usize, 0, 5, 2, 1, 3];
        let mut permuted = Array2::<f64>::zeros((6, 16));
        for (dst, &src) in perm.iter().enumerate() {
            permuted.row_mut(dst).assign(&frames.row(src));
        }
        let base = transformer_forward(&frames, &params).unwrap();
        let shuf = transformer_forward(&permuted, &params).unwrap();
        for l in 0..base.num_layers() {
            for (dst, &src) in perm.iter().enumerate() {
                for j in 0..16 {
                    let a = base.states[l][[src, j]];
                    let b = shuf.states[l][[dst, j]];
                    assert!(
                        (a - b).abs() < 1e-9,
                        "layer {l} row {src}->{dst} col {j}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn mlp_degenerate_affine_returns_bias() {
        let head = HeadParams {
            blocks: vec![],
            out: LinearParams {
                weight: Array2::zeros((4, 16)),
                bias: ndarray::arr1(&[1.5, -2.0, 0.0, 7.25]),
            },
        };
        let e = Array1::from_elem(16, 0.25);
        assert_eq!(mlp_forward(&e, &head), [1.5, -2.0, 0.0, 7.25]);
    }

    #[test]
    fn mlp_matches_straight_line_oracle() {
        // Independent scalar-loop evaluation of linear -> layer norm ->
        // GeLU -> final linear for a 1-block head.
        let params = tiny_model(21);
        let head = &params.tensors.head;
        assert_eq!(head.blocks.len(), 1);
        let mut rng = stream_rng(99, 7);
        let d = 16;
        let e = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0f64));

        let hb = &head.blocks[0];
        let mut lin = vec![0.0; d];
        for i in 0..d {
            let mut acc = hb.linear.bias[i];
            for j in 0..d {
                acc += hb.linear.weight[[i, j]] * e[j];
            }
            lin[i] = acc;
        }
        let mean = lin.iter().sum::<f64>() / d as f64;
        let var = lin.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let rstd = 1.0 / (var + LN_EPS).sqrt();
        let act: Vec<f64> = (0..d)
            .map(|i| {
                let xhat = (lin[i] - mean) * rstd;
                let y = xhat * hb.ln.gamma[i] + hb.ln.beta[i];
                // tanh-form GeLU, written out longhand
                let s = (2.0 / std::f64::consts::PI).sqrt();
                0.5 * y * (1.0 + (s * (y + 0.044715 * y.powi(3))).tanh())
            })
            .collect();
        let mut expect = [0.0; 4];
        for (i, exp) in expect.iter_mut().enumerate() {
            let mut acc = head.out.bias[i];
            for j in 0..d {
                acc += head.out.weight[[i, j]] * act[j];
            }
            *exp = acc;
        }

        let got = mlp_forward(&e, head);
        for i in 0..4 {
            assert!((got[i] - expect[i]).abs() < 1e-12, "axis {i}");
        }
    }

    #[test]
    fn positional_encoding_structure() {
        let pe = positional_encoding(4, 6);
        // Position 0: sin(0)=0, cos(0)=1 alternating.
        assert_eq!(pe.row(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        // First column is sin(pos).
        for pos in 0..4 {
            assert!((pe[[pos, 0]] - (pos as f64).sin()).abs() < 1e-15);
            for j in 0..6 {
                assert!(pe[[pos, j]].abs() <= 1.0);
            }
        }
        // Odd width is handled.
        let pe = positional_encoding(3, 5);
        assert_eq!(pe.ncols(), 5);
    }

    #[test]
    fn predict_composes_the_stage_functions() {
        let params = tiny_model(13);
        let wave = random_wave(40, 50);
        let frames = frontend_frames(&wave, &params);
        let pe = positional_encoding(frames.nrows(), frames.ncols());
        let stack = transformer_forward(&(&frames + &pe), &params).unwrap();
        let z = layer_weight_normalize(&params.tensors.layer_weights).unwrap();
        let e = crate::model::l2_normalize(&aggregate_embedding(&stack, &z)).unwrap();
        let raw = mlp_forward(&e, &params.tensors.head);
        let manual = params.normalizer.denormalize(raw);
        let direct = predict(&wave, &params).unwrap();
        for (a, b) in direct.to_array().iter().zip(manual.to_array().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_with_forced_zero_head_returns_means() {
        let mut params = tiny_model(2);
        params.tensors.head.blocks.clear();
        params.tensors.head.out.weight.fill(0.0);
        params.tensors.head.out.bias.fill(0.0);
        params.normalizer = Normalizer {
            mean: [5.0; 4],
            std: [1.0; 4],
        };
        let scores = predict(&random_wave(30, 3), &params).unwrap();
        assert_eq!(scores.to_array(), [5.0; 4]);
    }

    #[test]
    fn traced_forward_matches_predict(){
        let params = tiny_model(17);
        let wave = random_wave(36, 9);
        let trace = forward_traced(&wave, &params).unwrap();
        let scores = predict(&wave, &params).unwrap();
        let via_trace = params.normalizer.denormalize(trace.raw);
        for (a, b) in scores.to_array().iter().zip(via_trace.to_array().iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(trace.frame_count(), 8); // len 36, frame 8, stride 4
        assert!(trace.stack.is_finite());
        assert!((trace.e.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn layer_weight_scaling_leaves_prediction_unchanged() {
        let params = tiny_model(29);
        let wave = random_wave(48, 31);
        let base = predict(&wave, &params).unwrap();
        let mut scaled = params.clone();
        scaled.tensors.layer_weights.mapv_inplace(|w| w * 3.7);
        let got = predict(&wave, &scaled).unwrap();
        for (a, b) in base.to_array().iter().zip(got.to_array().iter()) {
            assert!((a - b).abs() < 1e-9, "homogeneity violated: {a} vs {b}");
        }
    }

    #[test]
    fn f32_mode_runs_and_stays_close_to_f64() {
        let params = tiny_model(41);
        let wave = random_wave(64, 77);
        let full = predict(&wave, &params).unwrap();
        let mut low = params.clone();
        low.cfg.precision = Precision::F32;
        let fast = predict(&wave, &low).unwrap();
        let fast2 = predict(&wave, &low).unwrap();
        assert_eq!(fast.to_array(), fast2.to_array(), "mode must be deterministic");
        for (a, b) in full.to_array().iter().zip(fast.to_array().iter()) {
            assert!((a - b).abs() < 1e-3, "f32 drifted: {a} vs {b}");
        }
        // Training path refuses the reduced mode.
        assert!(forward_traced(&wave, &low).is_err());
    }
}
