//! Deterministic corpus builder: WAV files plus a labeled manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::audio_io::write_wav;
use crate::manifest::{write_manifest, ManifestEntry};
use crate::rng::{streams, substream_rng};
use crate::synthdata::degrade::{degrade, DegradationSpec};
use crate::synthdata::generate::synth_clip;
use crate::synthdata::labels::proxy_labels;
use crate::synthdata::SynthError;

/// Severity levels the corpus cycles through.
pub const SEVERITY_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Clip durations are drawn uniformly from this range (seconds); long
/// enough for several encoder frames, short enough to keep a large
/// corpus cheap to build and train on.
const DURATION_RANGE: std::ops::Range<f64> = 1.5..3.0;

/// Degradation bundle whose severity lands (within rounding of the bit
/// depth) on `s`: every knob moves linearly with `s`, so the scalar
/// severity recovers `s` at the grid points. `s = 0` is the identity.
pub fn spec_for_severity(s: f64) -> DegradationSpec {
    if s <= 0.0 {
        return DegradationSpec::default();
    }
    DegradationSpec {
        snr_db: Some(40.0 - 40.0 * s),
        clip_threshold: Some(1.0 - 0.9 * s),
        lowpass_hz: Some(8000.0 - 7500.0 * s),
        bits: Some((16.0 - 12.0 * s).round() as u32),
    }
}

/// What `build_corpus` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub manifest_path: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// Build `n` labeled clips under `out_dir` and write `manifest.jsonl`
/// next to them.
///
/// Clip `i` uses `1 + (i mod 6)` components and the severity bucket
/// `(i div 6) mod 5`, so component counts and severities are balanced
/// and deconfounded. All randomness derives from per-clip substreams of
/// `seed`: rebuilding with the same arguments is byte-identical, no
/// clip's audio depends on how many clips come before it, and `jobs > 1`
/// builds clips in parallel with identical results.
pub fn build_corpus(
    n: usize,
    seed: u64,
    out_dir: &Path,
    jobs: usize,
) -> Result<CorpusSummary, SynthError> {
    if n == 0 {
        return Err(SynthError::EmptyCorpus);
    }
    fs::create_dir_all(out_dir).map_err(|source| SynthError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let build_one = |i: usize| -> Result<ManifestEntry, SynthError> {
        let components = 1 + (i % 6);
        let bucket = (i / 6) % SEVERITY_GRID.len();
        let spec = spec_for_severity(SEVERITY_GRID[bucket]);
        let severity = spec.severity();

        let mut clip_rng = substream_rng(seed, streams::SYNTH_CLIP, i as u64);
        let clip_seed: u64 = clip_rng.random();
        let duration = clip_rng.random_range(DURATION_RANGE);
        let degrade_seed: u64 = substream_rng(seed, streams::SYNTH_DEGRADE, i as u64).random();
        let label_seed: u64 = substream_rng(seed, streams::SYNTH_LABEL, i as u64).random();

        let clean = synth_clip(clip_seed, components, duration)?;
        let degraded = degrade(&clean, &spec, degrade_seed)?;
        let labels = proxy_labels(severity, components, label_seed);

        let filename = format!("clip_{i:06}.wav");
        write_wav(out_dir.join(&filename), &degraded)?;

        let mut entry = ManifestEntry::new(&filename);
        entry.set_scores(&labels);
        entry.system_id = Some(format!("sev_{:03}", (SEVERITY_GRID[bucket] * 100.0) as u32));
        entry.caption = Some(format!("synthetic mixture with {components} components"));
        entry
            .extra
            .insert("severity".into(), serde_json::json!(severity));
        entry
            .extra
            .insert("components".into(), serde_json::json!(components));
        Ok(entry)
    };

    let entries: Vec<ManifestEntry> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .map(build_one)
                .collect::<Result<_, _>>()
        })?
    } else {
        (0..n).map(build_one).collect::<Result<_, _>>()?
    };

    let manifest_path = out_dir.join("manifest.jsonl");
    write_manifest(&manifest_path, &entries)?;
    Ok(CorpusSummary {
        manifest_path,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::read_manifest;
    use crate::metrics::pearson;
    use crate::scores::Axis;

    #[test]
    fn rebuild_is_byte_identical_across_job_counts() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        build_corpus(12, 5, &a, 1).unwrap();
        build_corpus(12, 5, &b, 2).unwrap();
        for name in ["manifest.jsonl", "clip_000000.wav", "clip_000011.wav"] {
            let left = fs::read(a.join(name)).unwrap();
            let right = fs::read(b.join(name)).unwrap();
            assert_eq!(left, right, "{name}");
        }
        // A different seed changes the audio.
        let c = dir.path().join("c");
        build_corpus(12, 6, &c, 1).unwrap();
        assert_ne!(
            fs::read(a.join("clip_000000.wav")).unwrap(),
            fs::read(c.join("clip_000000.wav")).unwrap()
        );
    }

    #[test]
    fn severity_drives_production_quality_down() {
        let dir = tempfile::tempdir().unwrap();
        let summary = build_corpus(60, 0, dir.path(), 1).unwrap();
        let severities: Vec<f64> = summary
            .entries
            .iter()
            .map(|e| e.extra["severity"].as_f64().unwrap())
            .collect();
        let pq: Vec<f64> = summary
            .entries
            .iter()
            .map(|e| e.axis_score(Axis::PQ).unwrap())
            .collect();
        assert!(pearson(&severities, &pq).unwrap() < -0.95);
    }

    #[test]
    fn grid_is_balanced_and_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let summary = build_corpus(60, 3, dir.path(), 1).unwrap();
        for (i, e) in summary.entries.iter().enumerate() {
            let components = e.extra["components"].as_u64().unwrap() as usize;
            assert_eq!(components, 1 + (i % 6));
            let severity = e.extra["severity"].as_f64().unwrap();
            let expected = SEVERITY_GRID[(i / 6) % 5];
            assert!((severity - expected).abs() < 1e-12, "clip {i}");
            assert_eq!(
                e.system_id.as_deref().unwrap(),
                format!("sev_{:03}", (expected * 100.0) as u32)
            );
            assert!(e.caption.as_deref().unwrap().contains(&components.to_string()));
        }
        // 60 clips cover each (components, severity) cell exactly twice.
        assert_eq!(
            summary
                .entries
                .iter()
                .filter(|e| e.system_id.as_deref() == Some("sev_100"))
                .count(),
            12
        );
    }

    #[test]
    fn manifest_paths_resolve_against_the_corpus_dir() {
        let dir = tempfile::tempdir().unwrap();
        let summary = build_corpus(2, 9, dir.path(), 1).unwrap();
        let reread = read_manifest(&summary.manifest_path).unwrap();
        assert_eq!(reread, summary.entries);
        for e in &reread {
            let resolved = e.resolve_audio_path(dir.path());
            assert!(resolved.exists(), "{resolved:?}");
        }
    }

    #[test]
    fn empty_request_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            build_corpus(0, 0, dir.path(), 1),
            Err(SynthError::EmptyCorpus)
        ));
    }
}
