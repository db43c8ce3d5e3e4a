//! ITU-R BS.1770-4 integrated loudness measurement and single-gain
//! normalization.
//!
//! K-weighting runs as two biquads (high shelf, then high pass) with
//! coefficients computed for the clip's own sample rate. Mean squares over
//! 100 ms windows combine into 400 ms gating blocks (75% overlap), gated
//! at an absolute -70 LKFS and then at -10 LU relative to the first-pass
//! mean. Channels are summed with unit weights, which covers the mono and
//! stereo material this pipeline handles.

use super::AudioClip;

/// Default normalization target, matching common corpus-preparation tooling.
pub const DEFAULT_TARGET_LUFS: f64 = -23.0;

const ABSOLUTE_GATE_LKFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct LoudnessOutcome {
    pub clip: AudioClip,
    /// Linear gain that was applied (1.0 when nothing was applied).
    pub gain: f64,
    /// Integrated loudness of the input, when defined.
    pub input_lufs: Option<f64>,
    /// Set when the clip was silent (or too short to gate) and was returned
    /// unchanged.
    pub silent: bool,
}

/// Integrated loudness in LUFS, or `None` when undefined (all blocks below
/// the absolute gate, or the clip is shorter than one 400 ms block).
pub fn measure_lufs(clip: &AudioClip) -> Option<f64> {
    let power = gated_mean_power(clip)?;
    Some(power_to_lufs(power))
}

pub(super) fn normalize(clip: &AudioClip, target_lufs: f64) -> LoudnessOutcome {
    match measure_lufs(clip) {
        Some(input_lufs) => {
            let gain = 10f64.powf((target_lufs - input_lufs) / 20.0);
            let samples = clip.samples.iter().map(|&s| s * gain).collect();
            LoudnessOutcome {
                clip: AudioClip {
                    samples,
                    sample_rate: clip.sample_rate,
                    channels: clip.channels,
                },
                gain,
                input_lufs: Some(input_lufs),
                silent: false,
            }
        }
        None => LoudnessOutcome {
            clip: clip.clone(),
            gain: 1.0,
            input_lufs: None,
            silent: true,
        },
    }
}

fn power_to_lufs(power: f64) -> f64 {
    -0.691 + 10.0 * power.log10()
}

fn gated_mean_power(clip: &AudioClip) -> Option<f64> {
    let samples_per_100ms = (clip.sample_rate / 10) as usize;
    if samples_per_100ms == 0 || clip.frames() < 4 * samples_per_100ms {
        return None;
    }

    // Per-channel K-weighted mean squares over 100 ms windows, summed across
    // channels with unit weights.
    let n_windows = clip.frames() / samples_per_100ms;
    let mut window_power = vec![0.0f64; n_windows];
    for ch in 0..clip.channels {
        let mut shelf = Biquad::high_shelf(clip.sample_rate as f64);
        let mut highpass = Biquad::high_pass(clip.sample_rate as f64);
        let stride = clip.channels as usize;
        let mut idx = ch as usize;
        for (w, power) in window_power.iter_mut().enumerate() {
            let _ = w;
            let mut square_sum = 0.0;
            for _ in 0..samples_per_100ms {
                let x = clip.samples[idx];
                let y = highpass.apply(shelf.apply(x));
                square_sum += y * y;
                idx += stride;
            }
            *power += square_sum / samples_per_100ms as f64;
        }
    }

    // 400 ms gating blocks from four consecutive 100 ms windows.
    let abs_gate_power = lufs_to_power(ABSOLUTE_GATE_LKFS);
    let blocks: Vec<f64> = window_power
        .windows(4)
        .map(|w| 0.25 * w.iter().sum::<f64>())
        .filter(|&p| p > abs_gate_power)
        .collect();
    if blocks.is_empty() {
        return None;
    }

    let first_pass = blocks.iter().sum::<f64>() / blocks.len() as f64;
    let rel_gate_power = lufs_to_power(power_to_lufs(first_pass) - RELATIVE_GATE_LU);
    let mut sum = 0.0;
    let mut count = 0usize;
    for &p in &blocks {
        if p > rel_gate_power {
            sum += p;
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    Some(sum / count as f64)
}

fn lufs_to_power(lufs: f64) -> f64 {
    10f64.powf((lufs + 0.691) / 10.0)
}

/// Direct form I biquad; a0 is normalized to 1.
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    /// Stage 1 pre-filter (head-related high shelf), parameterized for an
    /// arbitrary sample rate; reproduces the BS.1770-4 table at 48 kHz.
    fn high_shelf(sample_rate: f64) -> Self {
        let gain_db = 3.999_843_853_97;
        let q = 0.707_175_236_955_419_3;
        let center_hz = 1_681.974_450_955_533;

        let k = (std::f64::consts::PI * center_hz / sample_rate).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_155);
        let a0 = 1.0 + k / q + k * k;
        Self {
            b0: (vh + vb * k / q + k * k) / a0,
            b1: 2.0 * (k * k - vh) / a0,
            b2: (vh - vb * k / q + k * k) / a0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    /// Stage 2 pre-filter (high pass).
    fn high_pass(sample_rate: f64) -> Self {
        let q = 0.500_327_037_325_395_3;
        let center_hz = 38.135_470_876_139_82;

        let k = (std::f64::consts::PI * center_hz / sample_rate).tan();
        let a0 = 1.0 + k / q + k * k;
        Self {
            b0: 1.0,
            b1: -2.0,
            b2: 1.0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn apply(&mut self, x0: f64) -> f64 {
        let y0 = self.b0 * x0 + self.b1 * self.x1 + self.b2 * self.x2
            - self.a1 * self.y1
            - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x0;
        self.y2 = self.y1;
        self.y1 = y0;
        y0
    }
}
