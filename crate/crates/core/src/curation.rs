//! Dataset curation: percentile filtering of labeled manifests,
//! quality-prefix prompting for caption conditioning, and pseudo-labeling
//! of unlabeled audio with a trained model.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{batch_predict, BatchFailure};
use crate::manifest::{ManifestEntry, SCHEMA_VERSION};
use crate::metrics::{percentile, MetricsError};
use crate::model::ModelParams;
use crate::scores::{AesScores, Axis};

/// Caption prefix announcing a target quality level. No space before the
/// value: `Audio quality:7.5`.
pub const QUALITY_PREFIX: &str = "Audio quality:";

#[derive(Debug, Error)]
pub enum CurationError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{count} entries lack a {axis} score; first offenders: {paths:?}")]
    MissingScore {
        axis: Axis,
        count: usize,
        paths: Vec<String>,
    },
    #[error("caption already carries a quality prefix: {caption:?}")]
    AlreadyPrefixed { caption: String },
    #[error("rounding granularity must be positive")]
    BadRounding,
}

/// Score value below which entries are dropped, computed as the `p`-th
/// percentile of the observed scores. Shares the percentile definition
/// with the evaluation metrics so filter and report always agree.
pub fn percentile_threshold(scores: &[f64], p: f64) -> Result<f64, CurationError> {
    Ok(percentile(scores, p)?)
}

/// Summary of one filtering pass, suitable for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub schema_version: u32,
    pub axis: Axis,
    pub percentile: f64,
    pub threshold: f64,
    pub kept: usize,
    pub dropped: usize,
}

/// Keep only entries whose `axis` score is at or above the `p`-th
/// percentile of the corpus. Every entry must carry that score; entries
/// missing it make the whole call fail, listing the offending paths.
pub fn filter_manifest(
    entries: &[ManifestEntry],
    axis: Axis,
    p: f64,
) -> Result<(Vec<ManifestEntry>, FilterReport), CurationError> {
    let missing: Vec<String> = entries
        .iter()
        .filter(|e| e.axis_score(axis).is_none())
        .map(|e| e.audio_path.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CurationError::MissingScore {
            axis,
            count: missing.len(),
            paths: missing.into_iter().take(8).collect(),
        });
    }
    let scores: Vec<f64> = entries
        .iter()
        .map(|e| e.axis_score(axis).unwrap())
        .collect();
    let threshold = percentile_threshold(&scores, p)?;
    let kept: Vec<ManifestEntry> = entries
        .iter()
        .filter(|e| e.axis_score(axis).unwrap() >= threshold)
        .cloned()
        .collect();
    let report = FilterReport {
        schema_version: SCHEMA_VERSION,
        axis,
        percentile: p,
        threshold,
        kept: kept.len(),
        dropped: entries.len() - kept.len(),
    };
    Ok((kept, report))
}

/// Snap a score to the `1/rounding` grid: multiply, round half away
/// from zero, divide.
pub fn snap_to_grid(score: f64, rounding: u32) -> Result<f64, CurationError> {
    if rounding == 0 {
        return Err(CurationError::BadRounding);
    }
    let r = rounding as f64;
    Ok((score * r).round() / r)
}

/// Render a quality prefix for a score: the value is snapped to the
/// `1/rounding` grid and printed with at least one decimal digit, e.g.
/// `Audio quality:7.5` for (7.3, 2) and `Audio quality:6.0` for (6.1, 2).
pub fn quality_prefix(score: f64, rounding: u32) -> Result<String, CurationError> {
    let snapped = snap_to_grid(score, rounding)?;
    let mut rendered = format!("{snapped}");
    if !rendered.contains('.') {
        rendered.push_str(".0");
    }
    Ok(format!("{QUALITY_PREFIX}{rendered}"))
}

/// Extract the numeric value from text starting with a quality prefix.
pub fn parse_quality_prefix(text: &str) -> Option<f64> {
    let rest = text.strip_prefix(QUALITY_PREFIX)?;
    rest.split_whitespace().next()?.parse().ok()
}

/// Prepend a quality prefix to a caption: `<prefix> <caption>`. Captions
/// that already start with a quality prefix are rejected so repeated
/// passes cannot stack prefixes.
pub fn apply_prompting(prefix: &str, caption: &str) -> Result<String, CurationError> {
    if caption.trim_start().starts_with(QUALITY_PREFIX) {
        return Err(CurationError::AlreadyPrefixed {
            caption: caption.to_string(),
        });
    }
    Ok(format!("{prefix} {caption}"))
}

/// Prefix to use at generation time: the `p`-th percentile of the
/// training scores, expressed on the same grid the training prefixes
/// used. Steering toward a high percentile asks the generator for
/// better-than-typical quality without leaving the vocabulary it saw.
pub fn inference_prefix(
    training_scores: &[f64],
    rounding: u32,
    p: f64,
) -> Result<String, CurationError> {
    let value = percentile(training_scores, p)?;
    quality_prefix(value, rounding)
}

/// Summary of one pseudo-labeling pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelReport {
    pub schema_version: u32,
    pub labeled: usize,
    pub skipped_existing: usize,
    pub failed: Vec<BatchFailure>,
}

/// Score unlabeled entries with a trained model and write the predictions
/// into their score fields. With `overwrite` false, entries that already
/// carry any score are left untouched; files that fail to load keep their
/// entries unscored and are listed in the report.
pub fn pseudo_label(
    entries: &[ManifestEntry],
    params: &ModelParams,
    base_dir: &Path,
    overwrite: bool,
    jobs: usize,
) -> (Vec<ManifestEntry>, PseudoLabelReport) {
    let mut out = entries.to_vec();
    let todo: Vec<usize> = (0..entries.len())
        .filter(|&i| overwrite || !entries[i].has_any_score())
        .collect();
    let subset: Vec<ManifestEntry> = todo.iter().map(|&i| entries[i].clone()).collect();
    let outcome = batch_predict(&subset, params, base_dir, jobs);

    let mut labeled = 0;
    let mut pi = 0;
    let mut fi = 0;
    for &i in &todo {
        let path = &entries[i].audio_path;
        if pi < outcome.predictions.len() && outcome.predictions[pi].audio_path == *path {
            let p = &outcome.predictions[pi];
            out[i].set_scores(&AesScores::from_array([p.pq, p.pc, p.ce, p.cu]));
            labeled += 1;
            pi += 1;
        } else {
            debug_assert_eq!(outcome.failures[fi].audio_path, *path);
            fi += 1;
        }
    }

    let report = PseudoLabelReport {
        schema_version: SCHEMA_VERSION,
        labeled,
        skipped_existing: entries.len() - todo.len(),
        failed: outcome.failures,
    };
    (out, report)
}
