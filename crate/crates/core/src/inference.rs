//! Utterance-level scoring of arbitrary-length audio.
//!
//! A clip is conditioned, cut into consecutive non-overlapping 10-second
//! windows (a tail shorter than one frontend frame is folded into its
//! predecessor), each window is scored by the model, and the utterance
//! score is the length-weighted average of the window scores. Batch
//! scoring applies this per manifest entry, collecting per-file failures
//! instead of aborting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{chunk_windows, condition, load_wav, AudioClip, AudioError};
use crate::manifest::{ManifestEntry, PredictionRecord};
use crate::model::{predict, ModelError, ModelParams, NUM_AXES};
use crate::scores::AesScores;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("clip has no samples")]
    EmptyClip,
    #[error("window {index}: {source}")]
    Window {
        index: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Utterance-level prediction: the length-weighted average of per-window
/// scores, with the contributing windows retained for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct UtterancePrediction {
    pub scores: AesScores,
    pub window_count: usize,
    pub per_window_scores: Vec<AesScores>,
    /// Sample-length fraction of each window; sums to 1.
    pub weights: Vec<f64>,
}

/// Score one clip of any length: condition, window, score each window,
/// and average weighted by window sample count.
pub fn sliding_window_predict(
    clip: &AudioClip,
    params: &ModelParams,
) -> Result<UtterancePrediction, InferenceError> {
    sliding_window_predict_with(clip, params.cfg.frame_size, |wave| predict(wave, params))
}

/// [`sliding_window_predict`] with the per-window scorer injected, so the
/// windowing and averaging logic can be exercised against stub scorers.
/// Windows shorter than `min_window_samples` merge into their predecessor.
pub fn sliding_window_predict_with(
    clip: &AudioClip,
    min_window_samples: usize,
    scorer: impl Fn(&[f64]) -> Result<AesScores, ModelError>,
) -> Result<UtterancePrediction, InferenceError> {
    let conditioned = condition(clip);
    if conditioned.samples.is_empty() {
        return Err(InferenceError::EmptyClip);
    }
    let plan = chunk_windows(&conditioned).merge_short_tail(min_window_samples);
    let total = plan.total_samples() as f64;

    let mut per_window_scores = Vec::with_capacity(plan.len());
    let mut weights = Vec::with_capacity(plan.len());
    for (index, &(start, len)) in plan.offsets.iter().enumerate() {
        let window = &conditioned.samples[start..start + len];
        let scores = scorer(window).map_err(|source| InferenceError::Window { index, source })?;
        per_window_scores.push(scores);
        weights.push(len as f64 / total);
    }

    let mut acc = [0.0; NUM_AXES];
    for (w, s) in weights.iter().zip(per_window_scores.iter()) {
        for (a, v) in acc.iter_mut().zip(s.to_array()) {
            *a += w * v;
        }
    }
    Ok(UtterancePrediction {
        scores: AesScores::from_array(acc),
        window_count: plan.len(),
        per_window_scores,
        weights,
    })
}

/// A per-file failure from batch scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub audio_path: String,
    pub error: String,
}

/// Batch result: predictions for the files that scored, failures for the
/// rest, both in manifest order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchOutcome {
    pub predictions: Vec<PredictionRecord>,
    pub failures: Vec<BatchFailure>,
}

/// Score every manifest entry. Relative audio paths resolve against
/// `base_dir` (normally the manifest's directory). Each file is scored
/// independently, so batch composition and ordering cannot change any
/// file's scores; failures are collected per file. `jobs > 1` scores
/// files in parallel with identical results.
pub fn batch_predict(
    entries: &[ManifestEntry],
    params: &ModelParams,
    base_dir: &Path,
    jobs: usize,
) -> BatchOutcome {
    let score_one = |entry: &ManifestEntry| -> Result<PredictionRecord, BatchFailure> {
        let path = entry.resolve_audio_path(base_dir);
        let run = || -> Result<PredictionRecord, InferenceError> {
            let clip = load_wav(&path)?;
            let pred = sliding_window_predict(&clip, params)?;
            Ok(PredictionRecord {
                schema_version: crate::manifest::SCHEMA_VERSION,
                audio_path: entry.audio_path.clone(),
                pq: pred.scores.pq,
                pc: pred.scores.pc,
                ce: pred.scores.ce,
                cu: pred.scores.cu,
                window_count: pred.window_count,
                system_id: entry.system_id.clone(),
            })
        };
        run().map_err(|e| BatchFailure {
            audio_path: entry.audio_path.clone(),
            error: e.to_string(),
        })
    };

    let results: Vec<Result<PredictionRecord, BatchFailure>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            entries.par_iter().map(score_one).collect()
        })
    } else {
        entries.iter().map(score_one).collect()
    };

    let mut outcome = BatchOutcome::default();
    for r in results {
        match r {
            Ok(p) => outcome.predictions.push(p),
            Err(f) => outcome.failures.push(f),
        }
    }
    outcome
}
