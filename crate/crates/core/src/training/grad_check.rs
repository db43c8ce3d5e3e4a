//! Finite-difference verification of the analytic gradients.
//!
//! Every parameter coordinate is perturbed by ±h and the central
//! difference of the batch loss is compared against the backward pass.
//! Coordinates whose perturbation flips the sign of any per-axis
//! residual are skipped: the absolute-error term is non-differentiable
//! at a zero residual, so finite differences straddle the kink and
//! disagree with the (valid) subgradient there.

use crate::model::{forward_traced, EncoderConfig, ModelParams, NUM_AXES};
use crate::rng::{stream_rng, streams};
use rand::Rng;

use super::{backward, loss_aes_masked, TrainError};

/// Central-difference step.
const FD_STEP: f64 = 1e-5;

/// Relative-error denominator floor. Central differences of a loss near
/// 10 carry roundoff noise of about 1e-10 in absolute terms; the floor
/// keeps coordinates whose true gradient is tiny from turning that noise
/// into a large relative error, while still catching any real defect
/// bigger than `tolerance * floor` in absolute terms.
const DENOM_FLOOR: f64 = 1e-3;

/// Largest model the exhaustive check will accept.
const MAX_CHECK_PARAMS: usize = 10_000;

/// Outcome of one gradient check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GradCheckReport {
    /// Coordinates compared against finite differences.
    pub checked: usize,
    /// Coordinates skipped because a residual changed sign under ±h.
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    /// Name of the coordinate with the largest relative error.
    pub worst_coordinate: String,
    pub tolerance: f64,
    pub h: f64,
    pub passed: bool,
    /// Coordinates over tolerance, capped at a handful for reporting.
    pub failing: Vec<(String, f64)>,
}

/// Check the analytic gradient of a freshly initialized model of shape
/// `enc` on a small random batch. Fails with [`TrainError::ModelTooLarge`]
/// for models beyond [`MAX_CHECK_PARAMS`] coordinates.
pub fn grad_check(
    enc: &EncoderConfig,
    seed: u64,
    tolerance: f64,
) -> Result<GradCheckReport, TrainError> {
    enc.validate()?;
    let params = ModelParams::init(enc, seed)?;
    let n = params.tensors.num_params();
    if n > MAX_CHECK_PARAMS {
        return Err(TrainError::ModelTooLarge {
            params: n,
            limit: MAX_CHECK_PARAMS,
        });
    }
    let mut rng = stream_rng(seed, streams::GRAD_CHECK);
    let wave_len = enc.frame_size + 5 * enc.frame_stride;
    let batch: Vec<(Vec<f64>, [f64; NUM_AXES])> = (0..3)
        .map(|_| {
            let wave = (0..wave_len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
            (wave, target)
        })
        .collect();
    grad_check_batch(&params, &batch, tolerance)
}

/// Check analytic against finite-difference gradients on a caller-chosen
/// batch. Gradient clipping never applies here: the comparison uses the
/// raw backward output.
pub(crate) fn grad_check_batch(
    params: &ModelParams,
    batch: &[(Vec<f64>, [f64; NUM_AXES])],
    tolerance: f64,
) -> Result<GradCheckReport, TrainError> {
    let (_, _, grads) = backward(batch, params, &[true; NUM_AXES])?;
    compare_against_fd(params, batch, &grads.flatten(), tolerance)
}

/// Mean batch loss plus the sign of every per-sample, per-axis residual,
/// used to detect kink crossings between the two FD evaluations.
fn loss_and_signs(
    params: &ModelParams,
    batch: &[(Vec<f64>, [f64; NUM_AXES])],
) -> Result<(f64, Vec<[i8; NUM_AXES]>), TrainError> {
    let mut loss_sum = 0.0;
    let mut signs = Vec::with_capacity(batch.len());
    for (wave, target) in batch {
        let trace = forward_traced(wave, params)?;
        let (loss, _, _) = loss_aes_masked(&trace.raw, target, &[true; NUM_AXES]);
        loss_sum += loss;
        signs.push(std::array::from_fn(|a| {
            let r = trace.raw[a] - target[a];
            if r > 0.0 {
                1
            } else if r < 0.0 {
                -1
            } else {
                0
            }
        }));
    }
    Ok((loss_sum / batch.len() as f64, signs))
}

fn compare_against_fd(
    params: &ModelParams,
    batch: &[(Vec<f64>, [f64; NUM_AXES])],
    analytic: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport, TrainError> {
    let base = params.tensors.flatten();
    assert_eq!(base.len(), analytic.len());
    let mut scratch = params.clone();
    let mut flat = base.clone();

    let mut report = GradCheckReport {
        checked: 0,
        skipped_kinks: 0,
        max_rel_err: 0.0,
        worst_coordinate: String::new(),
        tolerance,
        h: FD_STEP,
        passed: true,
        failing: Vec::new(),
    };

    for i in 0..base.len() {
        flat[i] = base[i] + FD_STEP;
        scratch.tensors.load_flat(&flat)?;
        let (loss_plus, signs_plus) = loss_and_signs(&scratch, batch)?;

        flat[i] = base[i] - FD_STEP;
        scratch.tensors.load_flat(&flat)?;
        let (loss_minus, signs_minus) = loss_and_signs(&scratch, batch)?;

        flat[i] = base[i];

        if signs_plus != signs_minus {
            report.skipped_kinks += 1;
            continue;
        }
        report.checked += 1;
        let fd = (loss_plus - loss_minus) / (2.0 * FD_STEP);
        let denom = analytic[i].abs().max(fd.abs()).max(DENOM_FLOOR);
        let rel = (analytic[i] - fd).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_coordinate = params.tensors.coordinate_name(i);
        }
        if rel > tolerance {
            report.passed = false;
            if report.failing.len() < 8 {
                report
                    .failing
                    .push((params.tensors.coordinate_name(i), rel));
            }
        }
    }
    scratch.tensors.load_flat(&base)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_batch(params: &ModelParams, seed: u64) -> Vec<(Vec<f64>, [f64; NUM_AXES])> {
        let mut rng = stream_rng(seed, streams::GRAD_CHECK);
        let len = params.cfg.frame_size + 5 * params.cfg.frame_stride;
        (0..3)
            .map(|_| {
                let wave = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                let target = std::array::from_fn(|_| rng.random_range(-1.5..1.5));
                (wave, target)
            })
            .collect()
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let report = grad_check(&EncoderConfig::tiny(), 0, 1e-4).unwrap();
        assert!(
            report.passed,
            "max rel err {} at {} (failing: {:?})",
            report.max_rel_err, report.worst_coordinate, report.failing
        );
        assert!(report.max_rel_err < 1e-4);
        assert!(report.checked > 4_000, "checked {}", report.checked);
        // On a generic random batch no residual sits on the kink.
        assert_eq!(report.skipped_kinks + report.checked, 4_998);
    }

    #[test]
    fn corrupted_gradient_is_caught_and_named() {
        let params = ModelParams::init(&EncoderConfig::tiny(), 1).unwrap();
        let batch = small_batch(&params, 1);
        let (_, _, grads) = backward(&batch, &params, &[true; 4]).unwrap();
        let mut doctored = grads.flatten();
        // Corrupt the coordinate with the largest gradient magnitude.
        let idx = (0..doctored.len())
            .max_by(|&a, &b| doctored[a].abs().total_cmp(&doctored[b].abs()))
            .unwrap();
        doctored[idx] *= 2.0;
        let report = compare_against_fd(&params, &batch, &doctored, 1e-4).unwrap();
        assert!(!report.passed);
        assert_eq!(
            report.worst_coordinate,
            params.tensors.coordinate_name(idx)
        );
        assert!(report.max_rel_err > 0.3, "doubling should show up as ~0.5");
        assert!(report
            .failing
            .iter()
            .any(|(name, _)| *name == params.tensors.coordinate_name(idx)));
    }

    #[test]
    fn exact_zero_residual_coordinates_are_skipped_not_failed() {
        let params = ModelParams::init(&EncoderConfig::tiny(), 2).unwrap();
        let mut batch = small_batch(&params, 2);
        // Pin sample 0's first-axis target to the model output so that
        // residual is exactly zero: every coordinate influencing that
        // output now straddles the kink.
        let trace = forward_traced(&batch[0].0, &params).unwrap();
        batch[0].1[0] = trace.raw[0];
        let report = grad_check_batch(&params, &batch, 1e-4).unwrap();
        assert!(report.skipped_kinks > 0, "kink coordinates must be skipped");
        assert!(
            report.passed,
            "max rel err {} at {}",
            report.max_rel_err, report.worst_coordinate
        );
    }

    #[test]
    fn oversized_models_are_refused() {
        let err = grad_check(&EncoderConfig::desk(), 0, 1e-4).unwrap_err();
        assert!(matches!(err, TrainError::ModelTooLarge { .. }));
    }
}
