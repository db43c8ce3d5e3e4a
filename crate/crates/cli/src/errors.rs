//! Error classification for the exit-code contract.
//!
//! Every failure maps to one of three classes: usage errors (bad flags or
//! flag values, exit 1), data errors (unreadable or malformed inputs,
//! exit 2), and numerical failures (divergence, undefined statistics,
//! failed gradient checks, exit 3).

use std::fmt;

use audioaes::audio_io::AudioError;
use audioaes::curation::CurationError;
use audioaes::inference::InferenceError;
use audioaes::manifest::ManifestError;
use audioaes::metrics::{BootstrapError, MetricsError};
use audioaes::model::{CheckpointError, ModelError};
use audioaes::synthdata::SynthError;
use audioaes::training::TrainError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, flag values, or config entries. Exit 1.
    Usage(String),
    /// Missing or malformed input files, or inputs the operation cannot
    /// accept. Exit 2.
    Data(String),
    /// The computation itself failed: non-finite losses, undefined
    /// correlations, gradient-check failures. Exit 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            ModelError::TooManyFrames { .. } | ModelError::TooFewSamples { .. } => {
                CliError::Data(e.to_string())
            }
            ModelError::DegenerateLayerWeights { .. }
            | ModelError::DegenerateEmbedding { .. }
            | ModelError::ZeroVarianceAxis { .. }
            | ModelError::NonFinite { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Window { ref source, .. } => match source {
                ModelError::DegenerateLayerWeights { .. }
                | ModelError::DegenerateEmbedding { .. }
                | ModelError::NonFinite { .. } => CliError::Numeric(e.to_string()),
                _ => CliError::Data(e.to_string()),
            },
            InferenceError::EmptyClip | InferenceError::Audio(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(inner) => inner.into(),
            TrainError::InvalidConfig { .. } | TrainError::ModelTooLarge { .. } => {
                CliError::Usage(e.to_string())
            }
            TrainError::EmptyCorpus | TrainError::Misaligned { .. } => {
                CliError::Data(e.to_string())
            }
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            // All three arise from flag values, not from data on disk.
            SynthError::BadComponents { .. }
            | SynthError::BadDuration { .. }
            | SynthError::BadSpec { .. }
            | SynthError::EmptyCorpus => CliError::Usage(e.to_string()),
            SynthError::Io { .. } | SynthError::Audio(_) | SynthError::Manifest(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::ZeroVariance { .. } => CliError::Numeric(e.to_string()),
            MetricsError::BadPercentile { .. } => CliError::Usage(e.to_string()),
            MetricsError::LengthMismatch { .. }
            | MetricsError::TooFew { .. }
            | MetricsError::TooFewSystems { .. }
            | MetricsError::SystemMismatch { .. }
            | MetricsError::Empty => CliError::Data(e.to_string()),
        }
    }
}

impl From<BootstrapError> for CliError {
    fn from(e: BootstrapError) -> Self {
        match e {
            BootstrapError::NoResamples => CliError::Usage(e.to_string()),
            BootstrapError::Empty | BootstrapError::BadVote { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<CurationError> for CliError {
    fn from(e: CurationError) -> Self {
        match e {
            CurationError::Metrics(inner) => inner.into(),
            CurationError::BadRounding => CliError::Usage(e.to_string()),
            CurationError::MissingScore { .. } | CurationError::AlreadyPrefixed { .. } => {
                CliError::Data(e.to_string())
            }
        }
    }
}
