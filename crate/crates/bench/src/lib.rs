//! Shared fixtures for the pipeline benchmarks: deterministic waveforms
//! and pre-initialized models, so every benchmark measures the operation
//! under test rather than setup.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use audioaes::audio_io::{AudioClip, TARGET_SAMPLE_RATE};
use audioaes::model::{EncoderConfig, ModelParams};
use audioaes::scores::AesScores;

/// A deterministic tone-plus-noise clip of `seconds` length at the model
/// sample rate.
pub fn fixture_clip(seconds: f64, seed: u64) -> AudioClip {
    let n = (seconds * TARGET_SAMPLE_RATE as f64).round() as usize;
    let mut rng = StdRng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / TARGET_SAMPLE_RATE as f64;
            0.3 * (2.0 * std::f64::consts::PI * 330.0 * t).sin()
                + 0.1 * rng.random_range(-1.0..1.0)
        })
        .collect();
    AudioClip::mono(samples, TARGET_SAMPLE_RATE)
}

/// Desk-scale model with fresh (untrained) parameters.
pub fn fixture_model(seed: u64) -> ModelParams {
    ModelParams::init(&EncoderConfig::desk(), seed).expect("valid desk configuration")
}

/// Random labels on the 1-10 scale.
pub fn fixture_labels(n: usize, seed: u64) -> Vec<AesScores> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| AesScores::from_array(std::array::from_fn(|_| rng.random_range(1.0..=10.0))))
        .collect()
}

/// A ±1/0 vote vector for the bootstrap benchmark.
pub fn fixture_votes(n: usize, seed: u64) -> Vec<i8> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1..=1i8)).collect()
}
