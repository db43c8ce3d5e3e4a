//! Controlled degradations with a scalar severity summary.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioClip;
use crate::rng::{stream_rng, streams};
use crate::synthdata::SynthError;

/// A bundle of optional degradations. `None` fields are skipped; the
/// all-`None` spec is the identity and leaves samples bit-identical.
///
/// Applied in a fixed order: additive noise, hard clipping, low-pass
/// filtering, bit-depth reduction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DegradationSpec {
    /// Signal-to-noise ratio of added white noise, in dB. 40 is barely
    /// audible; 0 means noise as strong as the signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    /// Hard clip threshold in (0, 1]. 1.0 leaves a peak-normalized
    /// signal untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_threshold: Option<f64>,
    /// Low-pass cutoff in Hz, at most the 8 kHz Nyquist limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowpass_hz: Option<f64>,
    /// Quantization depth in bits, 1..=16.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |detail: String| Err(SynthError::BadSpec { detail });
        if let Some(snr) = self.snr_db {
            if !(-20.0..=60.0).contains(&snr) {
                return bad(format!("snr_db {snr} outside [-20, 60]"));
            }
        }
        if let Some(c) = self.clip_threshold {
            if !(c > 0.0 && c <= 1.0) {
                return bad(format!("clip_threshold {c} outside (0, 1]"));
            }
        }
        if let Some(fc) = self.lowpass_hz {
            if !(fc > 0.0 && fc <= 8000.0) {
                return bad(format!("lowpass_hz {fc} outside (0, 8000]"));
            }
        }
        if let Some(b) = self.bits {
            if !(1..=16).contains(&b) {
                return bad(format!("bits {b} outside 1..=16"));
            }
        }
        Ok(())
    }

    /// Scalar severity in [0, 1]: a weighted mix of the four degradation
    /// strengths, each mapped linearly onto [0, 1] over its useful range:
    ///
    /// - noise      (weight 0.4): 0 at 40 dB SNR, 1 at 0 dB
    /// - clipping   (weight 0.2): 0 at threshold 1.0, 1 at 0.1
    /// - low-pass   (weight 0.2): 0 at 8 kHz, 1 at 500 Hz
    /// - bit depth  (weight 0.2): 0 at 16 bits, 1 at 4 bits
    ///
    /// Absent degradations contribute 0, so the identity spec scores 0.
    pub fn severity(&self) -> f64 {
        let unit = |v: f64| v.clamp(0.0, 1.0);
        let noise = self.snr_db.map_or(0.0, |snr| unit((40.0 - snr) / 40.0));
        let clip = self
            .clip_threshold
            .map_or(0.0, |c| unit((1.0 - c) / 0.9));
        let lowpass = self
            .lowpass_hz
            .map_or(0.0, |fc| unit((8000.0 - fc) / 7500.0));
        let quant = self
            .bits
            .map_or(0.0, |b| unit((16.0 - b as f64) / 12.0));
        0.4 * noise + 0.2 * clip + 0.2 * lowpass + 0.2 * quant
    }
}

/// Apply the spec's degradations in order. Noise is drawn from a
/// dedicated stream of `seed`, so the same (clip, spec, seed) triple
/// always produces identical output.
pub fn degrade(clip: &AudioClip, spec: &DegradationSpec, seed: u64) -> Result<AudioClip, SynthError> {
    spec.validate()?;
    let mut x = clip.samples.clone();

    if let Some(snr_db) = spec.snr_db {
        let power = x.iter().map(|&v| v * v).sum::<f64>() / x.len().max(1) as f64;
        let noise_std = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        let mut rng = stream_rng(seed, streams::SYNTH_DEGRADE);
        for v in &mut x {
            let white: f64 = rng.sample(StandardNormal);
            *v += noise_std * white;
        }
    }
    if let Some(c) = spec.clip_threshold {
        for v in &mut x {
            *v = v.clamp(-c, c);
        }
    }
    if let Some(fc) = spec.lowpass_hz {
        x = lowpass_fir(&x, fc, clip.sample_rate);
    }
    if let Some(bits) = spec.bits {
        let scale = 2f64.powi(bits as i32 - 1);
        for v in &mut x {
            // Mid-rise quantizer: exactly 2^bits output levels.
            *v = ((*v * scale).floor().clamp(-scale, scale - 1.0) + 0.5) / scale;
        }
    }
    Ok(AudioClip::mono(x, clip.sample_rate))
}

/// Linear-phase windowed-sinc low-pass FIR, zero-padded at the edges so
/// the output length matches the input.
fn lowpass_fir(x: &[f64], cutoff_hz: f64, sample_rate: u32) -> Vec<f64> {
    const TAPS: usize = 63;
    let m = (TAPS - 1) / 2;
    let fc = cutoff_hz / sample_rate as f64;
    let mut h = [0.0f64; TAPS];
    for (k, tap) in h.iter_mut().enumerate() {
        let d = k as f64 - m as f64;
        let sinc = if d == 0.0 {
            2.0 * fc
        } else {
            (2.0 * std::f64::consts::PI * fc * d).sin() / (std::f64::consts::PI * d)
        };
        let hamming =
            0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (TAPS - 1) as f64).cos();
        *tap = sinc * hamming;
    }
    let gain: f64 = h.iter().sum();
    for tap in &mut h {
        *tap /= gain;
    }
    let n = x.len();
    let mut y = vec![0.0; n];
    for (i, out) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &tap) in h.iter().enumerate() {
            let j = i as isize + m as isize - k as isize;
            if j >= 0 && (j as usize) < n {
                acc += tap * x[j as usize];
            }
        }
        *out = acc;
    }
    y
}
