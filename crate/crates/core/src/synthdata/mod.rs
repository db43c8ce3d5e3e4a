//! Synthetic labeled corpus: procedural clip generation, controlled
//! degradations with a scalar severity, proxy aesthetics labels, and a
//! deterministic corpus builder that writes WAVs plus a manifest.
//!
//! The corpus exists so the whole pipeline can be exercised end to end
//! with known ground truth: severity is constructed to hurt production
//! quality, component count to raise production complexity, and the
//! remaining axes follow a documented mix of the two.

mod analysis;
mod corpus;
mod degrade;
mod generate;
mod labels;

use thiserror::Error;

use crate::audio_io::AudioError;
use crate::manifest::ManifestError;

pub use analysis::{count_spectral_peaks, onset_count, power_spectrum, spectral_flatness};
pub use corpus::{build_corpus, spec_for_severity, CorpusSummary, SEVERITY_GRID};
pub use degrade::{degrade, DegradationSpec};
pub use generate::{synth_clip, MAX_COMPONENTS};
pub use labels::proxy_labels;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("component count {got} outside 1..={max}", max = MAX_COMPONENTS)]
    BadComponents { got: usize },
    #[error("duration {got}s outside [1, 60]")]
    BadDuration { got: f64 },
    #[error("invalid degradation: {detail}")]
    BadSpec { detail: String },
    #[error("corpus size must be positive")]
    EmptyCorpus,
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}
