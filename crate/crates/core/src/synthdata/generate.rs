//! Procedural clip synthesis with a controllable component count.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::audio_io::AudioClip;
use crate::rng::{stream_rng, streams};
use crate::synthdata::SynthError;

/// Upper bound on mixture components per clip.
pub const MAX_COMPONENTS: usize = 6;

const SAMPLE_RATE: u32 = 16_000;
/// Linear fade-in applied where each component enters, in seconds.
const ATTACK_SECONDS: f64 = 0.01;
/// Final peak level after normalization.
const PEAK_LEVEL: f64 = 0.9;

/// Synthesize a deterministic mono clip at 16 kHz.
///
/// The clip mixes `components` generators drawn from a fixed cycle of
/// kinds — pure sine, amplitude-modulated noise, linear chirp, pulse
/// train — with staggered entry points, then peak-normalizes to 0.9.
/// A single component is always a pure sine, so the simplest clip has
/// exactly one spectral peak; more components mean a spectrally flatter
/// signal with more energy onsets.
pub fn synth_clip(seed: u64, components: usize, duration_s: f64) -> Result<AudioClip, SynthError> {
    if components == 0 || components > MAX_COMPONENTS {
        return Err(SynthError::BadComponents { got: components });
    }
    if !(1.0..=60.0).contains(&duration_s) || !duration_s.is_finite() {
        return Err(SynthError::BadDuration { got: duration_s });
    }
    let mut rng = stream_rng(seed, streams::SYNTH_CLIP);
    let n = (duration_s * SAMPLE_RATE as f64).round() as usize;
    let mut buf = vec![0.0; n];
    for c in 0..components {
        // Entry points stagger across the first half of the clip so each
        // component contributes for at least half the duration.
        let onset = c * n / (2 * components);
        add_component(&mut buf, c % 4, onset, &mut rng);
    }
    let peak = buf.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = PEAK_LEVEL / peak;
        for v in &mut buf {
            *v *= scale;
        }
    }
    Ok(AudioClip::mono(buf, SAMPLE_RATE))
}

fn add_component(buf: &mut [f64], kind: usize, onset: usize, rng: &mut ChaCha12Rng) {
    let n = buf.len();
    let sr = SAMPLE_RATE as f64;
    let attack = (ATTACK_SECONDS * sr) as usize;
    // A narrow amplitude range keeps component powers comparable, so
    // every component's entry is a visible energy step.
    let amp = rng.random_range(0.65..0.9);
    let env = |i: usize| -> f64 {
        if i < onset {
            0.0
        } else if i < onset + attack {
            (i - onset) as f64 / attack as f64
        } else {
            1.0
        }
    };
    match kind {
        0 => {
            // Pure sine: one stable spectral line.
            let f = rng.random_range(150.0..1200.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            for i in onset..n {
                let t = i as f64 / sr;
                buf[i] += env(i) * amp * (2.0 * PI * f * t + phase).sin();
            }
        }
        1 => {
            // Noise with slow, shallow amplitude modulation. Depth and
            // rate are kept small so the modulation never looks like a
            // fresh onset to the energy detector.
            let depth = rng.random_range(0.1..0.25);
            let rate = rng.random_range(0.5..1.5);
            for i in onset..n {
                let t = i as f64 / sr;
                let white: f64 = rng.sample(StandardNormal);
                let am = 1.0 + depth * (2.0 * PI * rate * t).sin();
                buf[i] += env(i) * amp * 0.7 * am * white;
            }
        }
        2 => {
            // Linear chirp from f0 to f1 over the component's lifetime.
            // The sweep stays above the sine band so the two kinds never
            // beat against each other.
            let f0 = rng.random_range(1400.0..2000.0);
            let f1 = rng.random_range(2400.0..4000.0);
            let span = (n - onset).max(1) as f64 / sr;
            for i in onset..n {
                let t = (i - onset) as f64 / sr;
                let phase = 2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * span));
                buf[i] += env(i) * amp * phase.sin();
            }
        }
        _ => {
            // Pulse train: decaying tone bursts at a few hertz.
            let rate = rng.random_range(3.0..7.0);
            let f = rng.random_range(800.0..3000.0);
            let period = (sr / rate) as usize;
            let decay = 0.010 * sr; // 10 ms time constant
            let mut start = onset;
            while start < n {
                let stop = (start + (0.030 * sr) as usize).min(n);
                for i in start..stop {
                    let k = (i - start) as f64;
                    let t = i as f64 / sr;
                    buf[i] +=
                        env(i) * amp * (-k / decay).exp() * (2.0 * PI * f * t).sin();
                }
                start += period;
            }
        }
    }
}
