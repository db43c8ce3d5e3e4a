//! Proxy aesthetics labels for synthetic clips.
//!
//! The label rule is a first-class contract — evaluation code and tests
//! rely on it, so treat any change as a breaking one:
//!
//! - **PQ** falls linearly with degradation severity:
//!   `pq = 10 - 9·severity`, so pristine audio scores 10 and a fully
//!   degraded clip scores 1.
//! - **PC** rises linearly with mixture density:
//!   `pc = 1 + 9·(components - 1)/5`, mapping 1..=6 components onto
//!   1..=10.
//! - **CE** mixes the two with quality dominant, plus bounded jitter:
//!   `ce = clamp(0.7·pq + 0.3·pc + u, 1, 10)`, `u` uniform in ±0.5.
//! - **CU** prefers quality but *simple* material (easier to reuse):
//!   `cu = clamp(0.7·pq + 0.3·(11 - pc) + u', 1, 10)`.

use rand::Rng;

use crate::rng::{stream_rng, streams};
use crate::scores::AesScores;
use crate::synthdata::generate::MAX_COMPONENTS;

/// Score a synthetic clip from its construction parameters. The jitter
/// on CE and CU comes from a dedicated stream of `seed`.
pub fn proxy_labels(severity: f64, components: usize, seed: u64) -> AesScores {
    debug_assert!((0.0..=1.0).contains(&severity));
    debug_assert!((1..=MAX_COMPONENTS).contains(&components));
    let pq = 10.0 - 9.0 * severity;
    let pc = 1.0 + 9.0 * (components as f64 - 1.0) / 5.0;
    let mut rng = stream_rng(seed, streams::SYNTH_LABEL);
    let ce = (0.7 * pq + 0.3 * pc + rng.random_range(-0.5..0.5)).clamp(1.0, 10.0);
    let cu = (0.7 * pq + 0.3 * (11.0 - pc) + rng.random_range(-0.5..0.5)).clamp(1.0, 10.0);
    AesScores { pq, pc, ce, cu }
}
