//! The deterministic training loop: epoch shuffling, per-clip chunk
//! sampling, gradient clipping, Adam updates, and a per-step log.
//!
//! Every stochastic choice is drawn from a named stream of the run seed
//! (shuffles keyed by epoch, chunk offsets keyed by epoch and clip), so a
//! run is a pure function of `(corpus, encoder config, train config)` and
//! an interrupted run resumed from a checkpoint replays the identical
//! trajectory.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::audio_io::{condition, AudioClip};
use crate::model::{
    EncoderConfig, ModelParams, Normalizer, Precision, TrainState, NUM_AXES,
};
use crate::rng::{streams, substream_rng};
use crate::scores::AesScores;

use super::{adam_step, backward, TrainConfig, TrainError};

/// Conditioned training corpus: mono waveforms at the model sample rate
/// plus one four-axis label per clip.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub waves: Vec<Vec<f64>>,
    pub labels: Vec<AesScores>,
    pub sample_rate: u32,
}

impl TrainingSet {
    /// Wrap waveforms that are already conditioned.
    pub fn new(
        waves: Vec<Vec<f64>>,
        labels: Vec<AesScores>,
        sample_rate: u32,
    ) -> Result<Self, TrainError> {
        if waves.len() != labels.len() {
            return Err(TrainError::Misaligned {
                clips: waves.len(),
                labels: labels.len(),
            });
        }
        if waves.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        Ok(Self {
            waves,
            labels,
            sample_rate,
        })
    }

    /// Condition raw clips (downmix, resample, loudness-normalize) and
    /// pair them with labels.
    pub fn from_clips(clips: &[AudioClip], labels: Vec<AesScores>) -> Result<Self, TrainError> {
        let waves = clips
            .iter()
            .map(|c| condition(c).samples)
            .collect::<Vec<_>>();
        let rate = crate::audio_io::TARGET_SAMPLE_RATE;
        Self::new(waves, labels, rate)
    }

    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }
}

/// One optimizer step's log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub epoch: u64,
    pub loss: f64,
    pub per_axis: [f64; NUM_AXES],
    pub lr: f64,
    pub grad_norm: f64,
}

/// Result of a training run. A run that hits a non-finite loss stops
/// with `diverged_at` set and returns the last finite parameters rather
/// than erroring, so callers can keep the usable model.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub state: TrainState,
    pub log: Vec<TrainLogRow>,
    pub diverged_at: Option<u64>,
}

/// Train a fresh model: initialize parameters from the run seed, fit the
/// label normalizer on the corpus, and optimize for `cfg.steps` steps.
pub fn train_run(
    set: &TrainingSet,
    enc: &EncoderConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mut params = ModelParams::init(enc, cfg.seed)?;
    params.normalizer = Normalizer::fit_masked(&set.labels, &cfg.axes)?;
    let state = TrainState::fresh(params.tensors.num_params());
    train_continue(set, cfg, params, state, None)
}

/// Continue training from existing parameters and optimizer state until
/// `cfg.steps` (the schedule total) or until `step_budget` more steps
/// have run, whichever comes first. The label normalizer stored in
/// `params` is kept as-is so resumed runs see the same target space.
pub fn train_continue(
    set: &TrainingSet,
    cfg: &TrainConfig,
    mut params: ModelParams,
    mut state: TrainState,
    step_budget: Option<u64>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    params.cfg.validate()?;
    params.normalizer.validate()?;
    if params.cfg.precision != Precision::F64 {
        return Err(TrainError::InvalidConfig {
            detail: "training requires the f64 numeric mode".into(),
        });
    }
    if state.m.len() != params.tensors.num_params() {
        return Err(TrainError::InvalidConfig {
            detail: format!(
                "optimizer state covers {} parameters but the model has {}",
                state.m.len(),
                params.tensors.num_params()
            ),
        });
    }

    let n = set.len();
    if n == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    let batch = cfg.batch_size.min(n);
    let steps_per_epoch = (n / batch).max(1) as u64;
    let chunk_samples = (cfg.chunk_seconds * set.sample_rate as f64).round() as usize;
    let targets: Vec<[f64; NUM_AXES]> = set
        .labels
        .iter()
        .map(|s| params.normalizer.normalize(s))
        .collect();

    let stop_at = match step_budget {
        Some(budget) => cfg.steps.min(state.step + budget),
        None => cfg.steps,
    };
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut order_epoch = None;

    while state.step < stop_at {
        let step = state.step + 1;
        let epoch = (step - 1) / steps_per_epoch;
        let pos = ((step - 1) % steps_per_epoch) as usize;

        if order_epoch != Some(epoch) {
            order = (0..n).collect();
            let mut rng = substream_rng(cfg.seed, streams::TRAIN_SHUFFLE, epoch);
            order.shuffle(&mut rng);
            order_epoch = Some(epoch);
        }

        let samples: Vec<(Vec<f64>, [f64; NUM_AXES])> = order
            [pos * batch..(pos * batch + batch).min(n)]
            .iter()
            .map(|&i| {
                let wave = chunk_of(&set.waves[i], chunk_samples, cfg.seed, epoch, i as u64);
                (wave, targets[i])
            })
            .collect();

        let (loss, per_axis, mut grads) = match backward(&samples, &params, &cfg.axes) {
            Ok(out) => out,
            Err(TrainError::NonFiniteLoss { .. }) => {
                return Ok(TrainOutcome {
                    params,
                    state,
                    log,
                    diverged_at: Some(step),
                });
            }
            Err(e) => return Err(e),
        };
        let grad_norm = grads.global_norm();
        if !grad_norm.is_finite() {
            return Ok(TrainOutcome {
                params,
                state,
                log,
                diverged_at: Some(step),
            });
        }
        if let Some(max_norm) = cfg.grad_clip {
            if grad_norm > max_norm {
                grads.scale(max_norm / grad_norm);
            }
        }
        let lr = adam_step(&mut params.tensors, &grads, &mut state, cfg);
        log.push(TrainLogRow {
            step,
            epoch,
            loss,
            per_axis,
            lr,
            grad_norm,
        });
    }

    Ok(TrainOutcome {
        params,
        state,
        log,
        diverged_at: None,
    })
}

/// Deterministic chunk of at most `chunk_samples` from one clip. Short
/// clips pass through whole; long clips contribute a random window whose
/// offset is redrawn each epoch from the clip's own substream.
fn chunk_of(wave: &[f64], chunk_samples: usize, seed: u64, epoch: u64, idx: u64) -> Vec<f64> {
    if wave.len() <= chunk_samples || chunk_samples == 0 {
        return wave.to_vec();
    }
    let mut rng = substream_rng(seed, streams::TRAIN_CHUNK, (epoch << 32) | idx);
    let offset = rng.random_range(0..=wave.len() - chunk_samples);
    wave[offset..offset + chunk_samples].to_vec()
}
