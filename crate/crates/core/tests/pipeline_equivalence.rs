//! End-to-end determinism: synthesize a corpus, train, checkpoint,
//! reload, predict, and evaluate — twice, from scratch — and require the
//! two passes to agree byte for byte at every artifact boundary.

use std::fs;
use std::path::Path;

use audioaes::audio_io::load_wav;
use audioaes::inference::batch_predict;
use audioaes::manifest::{LabeledSample, ManifestEntry};
use audioaes::metrics::eval_report;
use audioaes::model::{load_checkpoint, save_checkpoint, EncoderConfig};
use audioaes::scores::AesScores;
use audioaes::synthdata::build_corpus;
use audioaes::training::{train_run, TrainConfig, TrainingSet};

struct PipelineArtifacts {
    checkpoint_bytes: Vec<u8>,
    predictions_json: String,
    report_json: String,
}

/// Indices held out for evaluation: one per severity bucket so the
/// report sees several systems.
const HELD_OUT: [usize; 4] = [0, 7, 14, 21];

fn run_pipeline(root: &Path) -> PipelineArtifacts {
    let corpus_dir = root.join("corpus");
    let summary = build_corpus(24, 11, &corpus_dir, 1).unwrap();

    let mut train_entries: Vec<ManifestEntry> = Vec::new();
    let mut eval_entries: Vec<ManifestEntry> = Vec::new();
    for (i, e) in summary.entries.iter().enumerate() {
        if HELD_OUT.contains(&i) {
            eval_entries.push(e.clone());
        } else {
            train_entries.push(e.clone());
        }
    }

    let mut clips = Vec::new();
    let mut labels = Vec::new();
    for e in &train_entries {
        let sample = LabeledSample::from_entry(e, "corpus manifest").unwrap();
        clips.push(load_wav(e.resolve_audio_path(&corpus_dir)).unwrap());
        labels.push(sample.scores);
    }
    let set = TrainingSet::from_clips(&clips, labels).unwrap();

    let cfg = TrainConfig {
        steps: 12,
        warmup_steps: 3,
        batch_size: 4,
        seed: 7,
        ..Default::default()
    };
    let outcome = train_run(&set, &EncoderConfig::desk(), &cfg).unwrap();
    assert!(outcome.diverged_at.is_none());

    let ckpt_path = root.join("model.ckpt");
    save_checkpoint(&ckpt_path, &outcome.params, Some(&outcome.state)).unwrap();
    let checkpoint_bytes = fs::read(&ckpt_path).unwrap();

    let loaded = load_checkpoint(&ckpt_path).unwrap();
    let batch = batch_predict(&eval_entries, &loaded.params, &corpus_dir, 1);
    assert!(batch.failures.is_empty());
    let predictions_json = serde_json::to_string_pretty(&batch.predictions).unwrap();

    let pairs: Vec<(AesScores, AesScores, Option<String>)> = batch
        .predictions
        .iter()
        .zip(&eval_entries)
        .map(|(p, e)| {
            (
                AesScores::from_array([p.pq, p.pc, p.ce, p.cu]),
                e.scores().unwrap(),
                e.system_id.clone(),
            )
        })
        .collect();
    let report = eval_report(&pairs).unwrap();
    let report_json = serde_json::to_string_pretty(&report).unwrap();

    PipelineArtifacts {
        checkpoint_bytes,
        predictions_json,
        report_json,
    }
}

#[test]
fn two_fresh_passes_agree_byte_for_byte() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run_pipeline(dir_a.path());
    let b = run_pipeline(dir_b.path());
    assert_eq!(a.checkpoint_bytes, b.checkpoint_bytes);
    assert_eq!(a.predictions_json, b.predictions_json);
    assert_eq!(a.report_json, b.report_json);
    // The artifacts are non-trivial.
    assert!(a.checkpoint_bytes.len() > 100_000);
    assert!(a.predictions_json.contains("window_count"));
    assert!(a.report_json.contains("utt_pcc"));
}

#[test]
fn parallel_prediction_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    let summary = build_corpus(6, 3, &corpus_dir, 1).unwrap();
    let params = audioaes::model::ModelParams::init(&EncoderConfig::desk(), 5).unwrap();
    let sequential = batch_predict(&summary.entries, &params, &corpus_dir, 1);
    let parallel = batch_predict(&summary.entries, &params, &corpus_dir, 3);
    assert_eq!(sequential, parallel);
    assert_eq!(sequential.predictions.len(), 6);
}
