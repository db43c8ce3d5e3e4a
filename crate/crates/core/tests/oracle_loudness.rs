//! Loudness measurement checked against values from an independent
//! implementation of the same gated-loudness algorithm (rate-adapted
//! K-weighting, 400 ms blocks at 75% overlap, -70 LKFS absolute and
//! -10 LU relative gates), computed offline with numpy-backed filtering
//! and frozen here.

use std::f64::consts::PI;

use audioaes::audio_io::{loudness_normalize, measure_lufs, AudioClip};

const TOL: f64 = 1e-9;

fn sine(freq: f64, amp: f64, seconds: f64, sample_rate: u32) -> AudioClip {
    let n = (seconds * sample_rate as f64) as usize;
    AudioClip::mono(
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
            .collect(),
        sample_rate,
    )
}

#[test]
fn full_scale_reference_tone_at_48k() {
    // 997 Hz, amplitude 1.0, 5 s. The classic reference tone measures
    // just above -3.01 LUFS (its mean square is 1/2).
    let lufs = measure_lufs(&sine(997.0, 1.0, 5.0, 48_000)).unwrap();
    assert!(
        (lufs - -3.010273602492416).abs() < TOL,
        "measured {lufs}"
    );
}

#[test]
fn quarter_amplitude_tone_at_16k() {
    let lufs = measure_lufs(&sine(997.0, 0.25, 3.0, 16_000)).unwrap();
    assert!(
        (lufs - -15.011230177731191).abs() < TOL,
        "measured {lufs}"
    );
}

#[test]
fn relative_gate_discards_the_faint_tail() {
    // 2 s at amplitude 0.5 followed by 6 s at amplitude 0.004. The tail
    // sits near -55 LUFS: above the absolute gate but more than 10 LU
    // below the loud passage, so gating must exclude it. An ungated
    // average over all blocks would land far below this value.
    let mut samples = sine(997.0, 0.5, 2.0, 16_000).samples;
    samples.extend(sine(997.0, 0.004, 6.0, 16_000).samples);
    let lufs = measure_lufs(&AudioClip::mono(samples, 16_000)).unwrap();
    assert!(
        (lufs - -9.329199369956097).abs() < TOL,
        "measured {lufs}"
    );
}

#[test]
fn low_frequency_is_attenuated_by_the_weighting() {
    // 60 Hz at amplitude 0.5. Unweighted this would be about -9.7; the
    // high-pass stage pushes it below -12.5.
    let lufs = measure_lufs(&sine(60.0, 0.5, 3.0, 16_000)).unwrap();
    assert!(
        (lufs - -12.53678883395969).abs() < TOL,
        "measured {lufs}"
    );
}

#[test]
fn gain_scaling_moves_loudness_linearly() {
    // A 20 dB amplitude drop moves the measurement by exactly -20 LU
    // as long as no gating boundary is crossed.
    let loud = measure_lufs(&sine(440.0, 0.8, 3.0, 16_000)).unwrap();
    let soft = measure_lufs(&sine(440.0, 0.08, 3.0, 16_000)).unwrap();
    assert!(((loud - soft) - 20.0).abs() < 1e-9, "{loud} vs {soft}");
}

#[test]
fn normalization_hits_the_target() {
    for target in [-23.0, -16.0] {
        let out = loudness_normalize(&sine(500.0, 0.3, 2.0, 16_000), target);
        assert!(!out.silent);
        let measured = measure_lufs(&out.clip).unwrap();
        assert!(
            (measured - target).abs() < 1e-6,
            "target {target}, measured {measured}"
        );
    }
}

#[test]
fn silence_is_left_alone() {
    let silent = AudioClip::mono(vec![0.0; 32_000], 16_000);
    assert!(measure_lufs(&silent).is_none());
    let out = loudness_normalize(&silent, -23.0);
    assert!(out.silent);
    assert_eq!(out.gain, 1.0);
    assert_eq!(out.clip.samples, silent.samples);
}
