//! Audio aesthetics assessment: data conditioning, a transformer score
//! predictor trained from scratch, windowed inference, evaluation metrics,
//! and corpus curation utilities.
//!
//! The pipeline predicts four aesthetics axes on a 1-10 scale:
//!
//! - **PQ** — production quality (technical merit: clarity, dynamics,
//!   spectral balance)
//! - **PC** — production complexity (density of the audio scene)
//! - **CE** — content enjoyment (subjective appeal)
//! - **CU** — content usefulness (reusability as source material)
//!
//! Entry points: [`audio_io`] for loading and conditioning clips,
//! [`model`] for the score predictor, [`training`] for fitting it,
//! [`inference`] for whole-utterance prediction, [`metrics`] for
//! evaluation, and [`curation`]/[`synthdata`] for dataset work.

pub mod audio_io;
pub mod curation;
pub mod inference;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scores;
pub mod synthdata;
pub mod training;

pub use audio_io::{AudioClip, AudioError};
pub use curation::CurationError;
pub use inference::{InferenceError, UtterancePrediction};
pub use manifest::{LabeledSample, ManifestEntry, ManifestError};
pub use metrics::{EvalReport, MetricsError, PairwiseResult};
pub use model::{EncoderConfig, ModelError, ModelParams};
pub use scores::{AesScores, Axis};
pub use synthdata::{DegradationSpec, SynthError};
pub use training::{TrainConfig, TrainError};
