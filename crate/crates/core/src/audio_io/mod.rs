//! Audio decoding and conditioning.
//!
//! Everything downstream of this module sees 16 kHz mono f64 waveforms.
//! WAV decode/encode, channel mixdown, band-limited resampling, BS.1770
//! loudness normalization and the 10-second window plan live here.

mod loudness;
mod resample;
mod wav;

pub use loudness::{measure_lufs, LoudnessOutcome, DEFAULT_TARGET_LUFS};
pub use resample::resample;
pub use wav::{load_wav, write_wav};

use thiserror::Error;

/// Target sample rate for the scoring pipeline.
pub const TARGET_SAMPLE_RATE: u32 = 16_000;

/// Window length used by training chunking and sliding-window inference.
pub const WINDOW_SECONDS: u32 = 10;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a RIFF/WAVE file")]
    NotWave { path: String },
    #[error("{path}: unsupported codec (format tag {format_tag}, {bits_per_sample} bits)")]
    UnsupportedCodec {
        path: String,
        format_tag: u16,
        bits_per_sample: u16,
    },
    #[error("{path}: data chunk truncated (expected {expected} bytes, found {found})")]
    TruncatedData {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}: malformed container: {detail}")]
    Malformed { path: String, detail: String },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A decoded waveform. Samples are interleaved when `channels > 1` and
/// nominally lie in [-1, 1]; gain stages may push them outside that range
/// in memory (WAV export clamps).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub channels: u16,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, channels: u16) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if channels == 0 {
            return Err(AudioError::InvalidClip("channel count must be at least 1".into()));
        }
        if samples.len() % channels as usize != 0 {
            return Err(AudioError::InvalidClip(format!(
                "{} samples is not a multiple of {} channels",
                samples.len(),
                channels
            )));
        }
        Ok(Self { samples, sample_rate, channels })
    }

    /// Mono clip at the given rate.
    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate, channels: 1 }
    }

    /// Number of sample frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn is_conditioned(&self) -> bool {
        self.channels == 1 && self.sample_rate == TARGET_SAMPLE_RATE
    }

    /// Samples of one channel, de-interleaved.
    pub fn channel(&self, ch: u16) -> Vec<f64> {
        assert!(ch < self.channels);
        self.samples
            .iter()
            .skip(ch as usize)
            .step_by(self.channels as usize)
            .copied()
            .collect()
    }
}

/// Collapse to mono (channel mean) and resample to 16 kHz.
///
/// Already-conforming clips are returned unchanged, sample for sample,
/// which also makes the operation idempotent. Output length is
/// `round(frames * 16000 / sample_rate)`.
pub fn to_mono_16k(clip: &AudioClip) -> AudioClip {
    if clip.is_conditioned() {
        return clip.clone();
    }
    let mono: Vec<f64> = if clip.channels == 1 {
        clip.samples.clone()
    } else {
        let ch = clip.channels as usize;
        clip.samples
            .chunks_exact(ch)
            .map(|frame| frame.iter().sum::<f64>() / ch as f64)
            .collect()
    };
    let samples = resample(&mono, clip.sample_rate, TARGET_SAMPLE_RATE);
    AudioClip::mono(samples, TARGET_SAMPLE_RATE)
}

/// Apply a single linear gain so integrated loudness hits `target_lufs`.
///
/// Clips whose integrated loudness is undefined (all-silent or shorter than
/// one gating block) come back unchanged with the `silent` flag set.
/// Samples are not clamped after the gain.
pub fn loudness_normalize(clip: &AudioClip, target_lufs: f64) -> LoudnessOutcome {
    loudness::normalize(clip, target_lufs)
}

/// Full conditioning used by both training and inference: mono 16 kHz,
/// then loudness-normalize to the default target. Keeping this a single
/// function guarantees the model always sees identically prepared audio.
pub fn condition(clip: &AudioClip) -> AudioClip {
    loudness_normalize(&to_mono_16k(clip), DEFAULT_TARGET_LUFS).clip
}

/// Contiguous cover of a clip by fixed-size windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    /// Full window length in samples (sample_rate * 10 for the default plan).
    pub window_samples: usize,
    /// (start, length) pairs in order.
    pub offsets: Vec<(usize, usize)>,
}

impl WindowPlan {
    /// Non-overlapping windows covering `total_len` samples: every window is
    /// `window_samples` long except a possibly shorter final one.
    pub fn for_len(total_len: usize, window_samples: usize) -> Self {
        assert!(window_samples > 0);
        let mut offsets = Vec::new();
        let mut start = 0;
        while start < total_len {
            let len = window_samples.min(total_len - start);
            offsets.push((start, len));
            start += len;
        }
        Self { window_samples, offsets }
    }

    /// Overlapping cover: full windows every `step` samples plus a final
    /// partial window for the tail. `step == window_samples` reduces to the
    /// non-overlapping plan.
    pub fn with_step(total_len: usize, window_samples: usize, step: usize) -> Self {
        assert!(window_samples > 0 && step > 0 && step <= window_samples);
        if step == window_samples {
            return Self::for_len(total_len, window_samples);
        }
        let mut offsets = Vec::new();
        let mut start = 0;
        while start < total_len {
            let len = window_samples.min(total_len - start);
            offsets.push((start, len));
            if start + window_samples >= total_len {
                break;
            }
            start += step;
        }
        Self { window_samples, offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn total_samples(&self) -> usize {
        self.offsets.iter().map(|&(_, len)| len).sum()
    }

    /// Fold a final window shorter than `min_len` into its predecessor.
    /// A single short window is left alone (there is nothing to merge into).
    pub fn merge_short_tail(mut self, min_len: usize) -> Self {
        if self.offsets.len() >= 2 {
            let (_, last_len) = *self.offsets.last().unwrap();
            if last_len < min_len {
                let (_, tail) = self.offsets.pop().unwrap();
                let (_, prev_len) = self.offsets.last_mut().unwrap();
                *prev_len += tail;
            }
        }
        self
    }
}

/// The 10-second non-overlapping chunking used by training and inference.
/// The final partial window is retained; an empty clip yields an empty plan.
pub fn chunk_windows(clip: &AudioClip) -> WindowPlan {
    let window = clip.sample_rate as usize * WINDOW_SECONDS as usize;
    WindowPlan::for_len(clip.frames(), window)
}
