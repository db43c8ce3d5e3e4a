//! Signal descriptors used to sanity-check the generator: power spectra,
//! spectral flatness, peak counting, and energy-onset counting.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided power spectrum (DC excluded), |X[k]|² for k in 1..n/2.
pub fn power_spectrum(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n < 4 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf[1..n / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Spectral flatness: geometric over arithmetic mean of the power
/// spectrum. Near 0 for a pure tone, near 1 for white noise.
pub fn spectral_flatness(samples: &[f64]) -> f64 {
    let power = power_spectrum(samples);
    if power.is_empty() {
        return 0.0;
    }
    const EPS: f64 = 1e-20;
    let n = power.len() as f64;
    let log_mean = power.iter().map(|&p| (p + EPS).ln()).sum::<f64>() / n;
    let mean = power.iter().sum::<f64>() / n + EPS;
    log_mean.exp() / mean
}

/// Count local maxima in the power spectrum that rise above
/// `rel_threshold` times the global maximum. A pure sine registers one.
pub fn count_spectral_peaks(samples: &[f64], rel_threshold: f64) -> usize {
    let power = power_spectrum(samples);
    let max = power.iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 {
        return 0;
    }
    let floor = rel_threshold * max;
    let mut count = 0;
    for i in 1..power.len().saturating_sub(1) {
        if power[i] > floor && power[i] > power[i - 1] && power[i] > power[i + 1] {
            count += 1;
        }
    }
    count
}

/// Frame length for onset detection, in seconds.
const ONSET_FRAME_SECONDS: f64 = 0.05;

/// Count energy onsets: positions where frame energy jumps by more than
/// 40% of the largest jump in the clip. A sustained tone registers one
/// (its start); every component entry or pulse adds another.
pub fn onset_count(samples: &[f64], sample_rate: u32) -> usize {
    let frame = ((ONSET_FRAME_SECONDS * sample_rate as f64) as usize).max(1);
    let energies: Vec<f64> = samples
        .chunks(frame)
        .map(|c| c.iter().map(|&v| v * v).sum::<f64>())
        .collect();
    let mut jumps = Vec::with_capacity(energies.len());
    let mut prev = 0.0;
    for &e in &energies {
        jumps.push(e - prev);
        prev = e;
    }
    let max_jump = jumps.iter().fold(0.0f64, |m, &v| m.max(v));
    if max_jump <= 0.0 {
        return 0;
    }
    jumps.iter().filter(|&&d| d > 0.4 * max_jump).count()
}
