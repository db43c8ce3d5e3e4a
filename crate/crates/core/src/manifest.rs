//! Manifest records and JSON-Lines iO.
//!
//! One line per record. The shared entry shape is
//! `{audio_path, pq?, pc?, ce?, cu?, caption?, system_id?, modality?, ...}`;
//! unknown keys pass through untouched so external metadata survives a
//! round trip. Atomic writes (temp sibling + rename) keep readers from
//! ever seeing a half-written file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scores::{AesScores, Axis};

/// Version stamped into every structured output: report documents and
/// the JSON-Lines records this module writes. Readers accept lines
/// without the field as version 1.
pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    BadRecord {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Invalid { path: String, detail: String },
}

/// One manifest line. Scores are optional per axis so the same record
/// type serves raw, pseudo-labeled, and fully labeled manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub audio_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<String>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl ManifestEntry {
    pub fn new(audio_path: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            audio_path: audio_path.into(),
            pq: None,
            pc: None,
            ce: None,
            cu: None,
            caption: None,
            system_id: None,
            modality: None,
            extra: serde_json::Map::new(),
        }
    }

    /// All four axis scores, when every one is present.
    pub fn scores(&self) -> Option<AesScores> {
        Some(AesScores {
            pq: self.pq?,
            pc: self.pc?,
            ce: self.ce?,
            cu: self.cu?,
        })
    }

    pub fn set_scores(&mut self, s: &AesScores) {
        self.pq = Some(s.pq);
        self.pc = Some(s.pc);
        self.ce = Some(s.ce);
        self.cu = Some(s.cu);
    }

    pub fn axis_score(&self, axis: Axis) -> Option<f64> {
        match axis {
            Axis::PQ => self.pq,
            Axis::PC => self.pc,
            Axis::CE => self.ce,
            Axis::CU => self.cu,
        }
    }

    pub fn has_any_score(&self) -> bool {
        self.pq.is_some() || self.pc.is_some() || self.ce.is_some() || self.cu.is_some()
    }

    /// Resolve `audio_path` against the directory of the manifest file it
    /// came from; absolute paths pass through.
    pub fn resolve_audio_path(&self, base_dir: &Path) -> PathBuf {
        let p = Path::new(&self.audio_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    }
}

/// A fully labeled sample: entry with all four scores, validated to the
/// 1-10 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub audio_path: String,
    pub scores: AesScores,
    pub system_id: Option<String>,
    pub modality: Option<String>,
}

impl LabeledSample {
    pub fn from_entry(entry: &ManifestEntry, origin: &str) -> Result<Self, ManifestError> {
        let scores = entry.scores().ok_or_else(|| ManifestError::Invalid {
            path: origin.to_string(),
            detail: format!("{}: missing one or more axis scores", entry.audio_path),
        })?;
        for (axis, v) in Axis::ALL.iter().zip(scores.to_array()) {
            if !(1.0..=10.0).contains(&v) {
                return Err(ManifestError::Invalid {
                    path: origin.to_string(),
                    detail: format!(
                        "{}: {} score {v} outside [1, 10]",
                        entry.audio_path,
                        axis.name()
                    ),
                });
            }
        }
        Ok(Self {
            audio_path: entry.audio_path.clone(),
            scores,
            system_id: entry.system_id.clone(),
            modality: entry.modality.clone(),
        })
    }
}

/// One prediction output line: scores plus how many windows contributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub audio_path: String,
    pub pq: f64,
    pub pc: f64,
    pub ce: f64,
    pub cu: f64,
    pub window_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
}

impl PredictionRecord {
    pub fn scores(&self) -> AesScores {
        AesScores {
            pq: self.pq,
            pc: self.pc,
            ce: self.ce,
            cu: self.cu,
        }
    }
}

/// One pairwise-comparison vote: +1 (A better), -1 (B better), 0 (tie).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub vote: i8,
}

/// Compatibility record for third-party predictors that emit one scalar
/// per file rather than four axes. `audio_path` is accepted as an alias
/// for `path`, so our own manifests coerce too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarScore {
    #[serde(alias = "audio_path")]
    pub path: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
}

/// Read a JSON-Lines file of `(path, scalar)` records.
pub fn read_scalar_scores(path: impl AsRef<Path>) -> Result<Vec<ScalarScore>, ManifestError> {
    read_jsonl(path)
}

fn origin(path: &Path) -> String {
    path.display().to_string()
}

/// Read a JSON-Lines file of `T` records; blank lines are skipped and
/// parse failures carry the 1-based line number.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: impl AsRef<Path>,
) -> Result<Vec<T>, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Unreadable {
        path: origin(path),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| ManifestError::BadRecord {
            path: origin(path),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Serialize records as JSON Lines and write them atomically.
pub fn write_jsonl<T: Serialize>(
    path: impl AsRef<Path>,
    records: &[T],
) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| ManifestError::Invalid {
            path: origin(path),
            detail: e.to_string(),
        })?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf).map_err(|source| ManifestError::Unwritable {
        path: origin(path),
        source,
    })
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, ManifestError> {
    read_jsonl(path)
}

pub fn write_manifest(
    path: impl AsRef<Path>,
    entries: &[ManifestEntry],
) -> Result<(), ManifestError> {
    write_jsonl(path, entries)
}

/// Labeled view of a manifest; errors name the first offending entry.
pub fn read_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>, ManifestError> {
    let path = path.as_ref();
    let entries = read_manifest(path)?;
    entries
        .iter()
        .map(|e| LabeledSample::from_entry(e, &origin(path)))
        .collect()
}

/// Write through a temp sibling and rename so the destination is always
/// either the old file or the complete new one.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_roundtrips_with_extra_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut e = ManifestEntry::new("a/b.wav");
        e.pq = Some(7.25);
        e.caption = Some("low drone".into());
        e.system_id = Some("sys3".into());
        e.extra
            .insert("severity".into(), serde_json::json!(0.75));
        write_manifest(&path, &[e.clone()]).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, vec![e]);
        assert_eq!(back[0].extra["severity"], serde_json::json!(0.75));
    }

    #[test]
    fn scores_require_all_four_axes() {
        let mut e = ManifestEntry::new("x.wav");
        e.pq = Some(5.0);
        e.pc = Some(5.0);
        e.ce = Some(5.0);
        assert!(e.scores().is_none());
        e.cu = Some(5.0);
        assert_eq!(
            e.scores(),
            Some(AesScores {
                pq: 5.0,
                pc: 5.0,
                ce: 5.0,
                cu: 5.0
            })
        );
    }

    #[test]
    fn labeled_sample_enforces_score_range() {
        let mut e = ManifestEntry::new("x.wav");
        e.set_scores(&AesScores {
            pq: 10.5,
            pc: 5.0,
            ce: 5.0,
            cu: 5.0,
        });
        let err = LabeledSample::from_entry(&e, "m.jsonl").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("PQ") && msg.contains("10.5"), "{msg}");
    }

    #[test]
    fn bad_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        fs::write(
            &path,
            "{\"audio_path\":\"a.wav\"}\n\nnot json at all\n",
        )
        .unwrap();
        match read_manifest(&path) {
            Err(ManifestError::BadRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected BadRecord, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_output_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let mut e = ManifestEntry::new("c.wav");
        e.set_scores(&AesScores {
            pq: 4.0,
            pc: 6.0,
            ce: 5.0,
            cu: 5.5,
        });
        let entries = vec![e; 3];
        write_manifest(&a, &entries).unwrap();
        write_manifest(&b, &entries).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert!(!dir.path().join("a.jsonl.partial").exists());
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let e = ManifestEntry::new("clips/x.wav");
        assert_eq!(
            e.resolve_audio_path(Path::new("/data")),
            PathBuf::from("/data/clips/x.wav")
        );
        let abs = ManifestEntry::new("/elsewhere/x.wav");
        assert_eq!(
            abs.resolve_audio_path(Path::new("/data")),
            PathBuf::from("/elsewhere/x.wav")
        );
    }
}
