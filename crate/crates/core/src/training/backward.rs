//! Reverse-mode differentiation of the full score-predictor forward pass,
//! written against the traced activations from the forward module.
//!
//! Layout conventions mirror the forward pass: activations are `[T, d]`
//! row-major, linear layers store `weight: [out, in]`, and every gradient
//! lands in a [`GradientSet`] with the same shapes as the parameters.
//! The hidden states of *every* layer feed the pooled embedding in
//! addition to the next block, so the pooling contribution is injected
//! into the running upstream gradient layer by layer while walking the
//! blocks in reverse.

use ndarray::{s, Array1, Array2, Axis as NdAxis};

use crate::model::{
    forward_traced, gelu_prime, AttentionParams, BlockParams, BlockTrace, GradientSet,
    LayerNormParams, LinearParams, LnCache, ModelParams, SampleTrace, NUM_AXES,
};

use super::{loss_aes_masked, TrainError};

/// Mean loss, mean per-axis loss, and mean parameter gradients over a
/// batch of `(waveform, normalized targets)` pairs.
///
/// Waveforms must already be conditioned (mono, model sample rate) and
/// targets must be in normalized space. Axes excluded by `mask`
/// contribute neither loss nor gradient. A non-finite per-sample loss is
/// reported as an error so the caller can stop before corrupting the
/// parameters.
pub fn backward<S: AsRef<[f64]>>(
    batch: &[(S, [f64; NUM_AXES])],
    params: &ModelParams,
    mask: &[bool; NUM_AXES],
) -> Result<(f64, [f64; NUM_AXES], GradientSet), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut grads = params.tensors.zeros_like();
    let mut loss_sum = 0.0;
    let mut axis_sum = [0.0; NUM_AXES];
    for (sample_index, (wave, target)) in batch.iter().enumerate() {
        let trace = forward_traced(wave.as_ref(), params)?;
        let (loss, per_axis, d_raw) = loss_aes_masked(&trace.raw, target, mask);
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { sample_index });
        }
        loss_sum += loss;
        for a in 0..NUM_AXES {
            axis_sum[a] += per_axis[a];
        }
        backprop_sample(&trace, params, d_raw, &mut grads);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((
        loss_sum * inv,
        std::array::from_fn(|a| axis_sum[a] * inv),
        grads,
    ))
}

/// Accumulate one sample's parameter gradients given `d_raw`, the loss
/// gradient at the head's four raw outputs.
fn backprop_sample(
    trace: &SampleTrace,
    params: &ModelParams,
    d_raw: [f64; NUM_AXES],
    g: &mut GradientSet,
) {
    let tensors = &params.tensors;
    let num_heads = params.cfg.num_heads;
    let t = trace.frame_count();

    // Head: final projection, then the linear -> layer norm -> GeLU
    // blocks in reverse.
    let d_raw_row = Array2::from_shape_fn((1, NUM_AXES), |(_, j)| d_raw[j]);
    let mut dhx = linear_backward(&d_raw_row, &trace.head_final_in, &tensors.head.out, &mut g.head.out);
    for ((hp, hg), ht) in tensors
        .head
        .blocks
        .iter()
        .zip(g.head.blocks.iter_mut())
        .zip(trace.head_blocks.iter())
        .rev()
    {
        let dln_out = &dhx * &ht.ln_out.mapv(gelu_prime);
        let dlin = ln_backward(&dln_out, &ht.ln, &hp.ln, &mut hg.ln);
        dhx = linear_backward(&dlin, &ht.x_in, &hp.linear, &mut hg.linear);
    }

    // Unit-normalization: e = ê/‖ê‖, so dê = (de − e·(e⋅de))/‖ê‖.
    let de = dhx.row(0).to_owned();
    let e_dot_de = trace.e.dot(&de);
    let de_hat = (&de - &(&trace.e * e_dot_de)) / trace.e_norm;

    // Pooling ê = (1/T)·Σ_t Σ_l z_l·h_{l,t}. Gradient w.r.t. each
    // normalized layer weight is dê ⋅ mean_t(h_l); gradient w.r.t. each
    // hidden state is (z_l/T)·dê for every frame.
    let num_layers = tensors.blocks.len();
    let mut dz = Array1::<f64>::zeros(num_layers);
    for l in 0..num_layers {
        let mean_h = trace.stack.states[l].mean_axis(NdAxis(0)).expect("t >= 1");
        dz[l] = de_hat.dot(&mean_h);
    }
    // Through the weight normalization z = w/Σw:
    // dw_m = (dz_m − Σ_l dz_l·z_l) / Σw.
    let dz_dot_z = dz.dot(&trace.z);
    for m in 0..num_layers {
        g.layer_weights[m] += (dz[m] - dz_dot_z) / trace.w_sum;
    }

    // Blocks in reverse. `dx` carries the gradient at block l's output;
    // each layer first receives its own pooling contribution because its
    // hidden state feeds the embedding directly as well as block l+1.
    let mut dx = Array2::<f64>::zeros((t, params.cfg.hidden_dim));
    for l in (0..num_layers).rev() {
        let coeff = trace.z[l] / t as f64;
        for mut row in dx.rows_mut() {
            row.scaled_add(coeff, &de_hat);
        }
        dx = block_backward(
            &dx,
            &trace.blocks[l],
            &tensors.blocks[l],
            &mut g.blocks[l],
            num_heads,
        );
    }

    // Frontend. The positional encoding is an additive constant, so the
    // gradient passes through unchanged.
    let dproj = ln_backward(&dx, &trace.front_ln, &tensors.frontend_ln, &mut g.frontend_ln);
    let _ = linear_backward(&dproj, &trace.frames, &tensors.frontend, &mut g.frontend);
}

/// `y = x·Wᵀ + b`: accumulate `dW += dyᵀ·x`, `db += Σ_rows dy`, and
/// return `dx = dy·W`.
fn linear_backward(
    dy: &Array2<f64>,
    x_in: &Array2<f64>,
    p: &LinearParams,
    g: &mut LinearParams,
) -> Array2<f64> {
    g.weight += &dy.t().dot(x_in);
    g.bias += &dy.sum_axis(NdAxis(0));
    dy.dot(&p.weight)
}

/// Backward through row-wise layer normalization with learned affine.
/// With `x̂` the standardized input and `r` the reciprocal standard
/// deviation per row:
///
/// ```text
/// dx = r·(dx̂ − mean(dx̂) − x̂·mean(dx̂ ⊙ x̂))    where dx̂ = dy·γ
/// ```
fn ln_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    p: &LayerNormParams,
    g: &mut LayerNormParams,
) -> Array2<f64> {
    let (t, d) = dy.dim();
    let mut dx = Array2::<f64>::zeros((t, d));
    // Accumulate affine gradients locally and add them once, so every
    // call contributes a single block to the shared accumulator (keeps
    // identical samples contributing bit-identical gradients).
    let mut dgamma = Array1::<f64>::zeros(d);
    let mut dbeta = Array1::<f64>::zeros(d);
    for i in 0..t {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for j in 0..d {
            let xh = cache.xhat[[i, j]];
            let dyij = dy[[i, j]];
            dgamma[j] += dyij * xh;
            dbeta[j] += dyij;
            let dxh = dyij * p.gamma[j];
            m1 += dxh;
            m2 += dxh * xh;
        }
        m1 /= d as f64;
        m2 /= d as f64;
        let r = cache.rstd[i];
        for j in 0..d {
            let dxh = dy[[i, j]] * p.gamma[j];
            dx[[i, j]] = r * (dxh - m1 - cache.xhat[[i, j]] * m2);
        }
    }
    g.gamma += &dgamma;
    g.beta += &dbeta;
    dx
}

/// Backward through one pre-norm block given the gradient at its output.
/// Returns the gradient at the block input. Forward structure:
///
/// ```text
/// a   = x + Wo(attention(ln1(x)))
/// out = a + ffn2(gelu(ffn1(ln2(a))))
/// ```
fn block_backward(
    dout: &Array2<f64>,
    tr: &BlockTrace,
    p: &BlockParams,
    g: &mut BlockParams,
    num_heads: usize,
) -> Array2<f64> {
    // Feed-forward branch.
    let dffn_act = linear_backward(dout, &tr.ffn_act, &p.ffn2, &mut g.ffn2);
    let dffn_pre = &dffn_act * &tr.ffn_pre.mapv(gelu_prime);
    let dln2_out = linear_backward(&dffn_pre, &tr.ln2_out, &p.ffn1, &mut g.ffn1);
    let mut da = ln_backward(&dln2_out, &tr.ln2, &p.ln2, &mut g.ln2);
    da += dout; // residual: out = a + ffn-branch

    // Attention branch.
    let dln1_out = attention_backward(&da, tr, &p.attn, &mut g.attn, num_heads);
    let mut dx = ln_backward(&dln1_out, &tr.ln1, &p.ln1, &mut g.ln1);
    dx += &da; // residual: a = x + attention-branch
    dx
}

/// Backward through multi-head self-attention (projections, per-head
/// scaled dot-product, softmax) given the gradient at the output
/// projection's output. Returns the gradient w.r.t. the block's `ln1`
/// output, which feeds all three of Q, K, and V.
fn attention_backward(
    dout: &Array2<f64>,
    tr: &BlockTrace,
    p: &AttentionParams,
    g: &mut AttentionParams,
    num_heads: usize,
) -> Array2<f64> {
    let (t, d) = dout.dim();
    let dh = d / num_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let dctx = linear_backward(dout, &tr.ctx, &p.wo, &mut g.wo);
    let mut dq = Array2::<f64>::zeros((t, d));
    let mut dk = Array2::<f64>::zeros((t, d));
    let mut dv = Array2::<f64>::zeros((t, d));
    for h in 0..num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let qh = tr.q.slice(cols);
        let kh = tr.k.slice(cols);
        let vh = tr.v.slice(cols);
        let alpha = &tr.attn_weights[h];
        let dctx_h = dctx.slice(cols);

        // ctx_h = α·v_h
        let dalpha = dctx_h.dot(&vh.t());
        dv.slice_mut(cols).assign(&alpha.t().dot(&dctx_h));

        // Row-wise softmax: ds_i = α_i ⊙ (dα_i − (dα_i ⋅ α_i)).
        let mut dscores = Array2::<f64>::zeros((t, t));
        for i in 0..t {
            let a_row = alpha.row(i);
            let da_row = dalpha.row(i);
            let dot = da_row.dot(&a_row);
            for j in 0..t {
                dscores[[i, j]] = a_row[j] * (da_row[j] - dot);
            }
        }

        // scores = (q_h·k_hᵀ)·scale
        dq.slice_mut(cols).assign(&(dscores.dot(&kh) * scale));
        dk.slice_mut(cols).assign(&(dscores.t().dot(&qh) * scale));
    }

    let mut dln1 = linear_backward(&dq, &tr.ln1_out, &p.wq, &mut g.wq);
    dln1 += &linear_backward(&dk, &tr.ln1_out, &p.wk, &mut g.wk);
    dln1 += &linear_backward(&dv, &tr.ln1_out, &p.wv, &mut g.wv);
    dln1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EncoderConfig;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn tiny_model(seed: u64) -> ModelParams {
        ModelParams::init(&EncoderConfig::tiny(), seed).unwrap()
    }

    fn random_batch(n: usize, len: usize, seed: u64) -> Vec<(Vec<f64>, [f64; 4])> {
        let mut rng = stream_rng(seed, 777);
        (0..n)
            .map(|_| {
                let wave: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                let target = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
                (wave, target)
            })
            .collect()
    }

    #[test]
    fn gradient_shapes_match_parameters() {
        let params = tiny_model(1);
        let batch = random_batch(2, 40, 5);
        let (loss, per_axis, grads) = backward(&batch, &params, &[true; 4]).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        assert!((per_axis.iter().sum::<f64>() - loss).abs() < 1e-12);
        assert_eq!(grads.num_params(), params.tensors.num_params());
        assert!(grads.is_finite());
        assert!(grads.global_norm() > 0.0);
    }

    #[test]
    fn backward_is_bitwise_deterministic() {
        let params = tiny_model(2);
        let batch = random_batch(3, 52, 6);
        let (l1, _, g1) = backward(&batch, &params, &[true; 4]).unwrap();
        let (l2, _, g2) = backward(&batch, &params, &[true; 4]).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1.flatten(), g2.flatten());
    }

    #[test]
    fn duplicated_sample_matches_single_sample_mean() {
        let params = tiny_model(3);
        let one = random_batch(1, 44, 9);
        let two = vec![one[0].clone(), one[0].clone()];
        let (l1, _, g1) = backward(&one, &params, &[true; 4]).unwrap();
        let (l2, _, g2) = backward(&two, &params, &[true; 4]).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1.flatten(), g2.flatten());
    }

    #[test]
    fn masked_axes_zero_their_head_rows() {
        let params = tiny_model(4);
        let batch = random_batch(2, 40, 11);
        let mask = [true, false, false, false];
        let (_, per_axis, grads) = backward(&batch, &params, &mask).unwrap();
        assert!(per_axis[0] > 0.0);
        assert_eq!(per_axis[1], 0.0);
        // Output rows for the masked axes receive no gradient at all.
        for a in 1..4 {
            assert_eq!(grads.head.out.bias[a], 0.0);
            for j in 0..grads.head.out.weight.ncols() {
                assert_eq!(grads.head.out.weight[[a, j]], 0.0);
            }
        }
        assert!(grads.head.out.bias[0] != 0.0);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let params = tiny_model(5);
        let batch: Vec<(Vec<f64>, [f64; 4])> = vec![];
        assert!(matches!(
            backward(&batch, &params, &[true; 4]),
            Err(TrainError::EmptyCorpus)
        ));
    }

    #[test]
    fn non_finite_target_is_reported_with_sample_index() {
        let params = tiny_model(6);
        let mut batch = random_batch(3, 40, 13);
        batch[2].1[1] = f64::NAN;
        match backward(&batch, &params, &[true; 4]) {
            Err(TrainError::NonFiniteLoss { sample_index }) => assert_eq!(sample_index, 2),
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }
}
