//! Bootstrap confidence intervals for pairwise listening-test win rates.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::SCHEMA_VERSION;
use crate::metrics::percentile;
use crate::rng::{streams, substream_rng};

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("no votes given")]
    Empty,
    #[error("vote at index {index} is {value}; votes must be -1, 0, or +1")]
    BadVote { index: usize, value: i8 },
    #[error("n_resamples must be positive")]
    NoResamples,
}

/// Net win rate of system A over system B with a bootstrap interval.
///
/// Votes are +1 (A preferred), -1 (B preferred), or 0 (tie); the net win
/// rate is their mean expressed in percent, so it lives in [-100, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub schema_version: u32,
    /// 100 · mean(votes).
    pub net_win_rate: f64,
    /// 2.5th percentile of the bootstrap distribution.
    pub ci_low: f64,
    /// 97.5th percentile of the bootstrap distribution.
    pub ci_high: f64,
    pub n_pairs: usize,
    pub n_resamples: usize,
}

fn net_rate(votes: &[i8]) -> f64 {
    100.0 * votes.iter().map(|&v| v as f64).sum::<f64>() / votes.len() as f64
}

/// Point estimate plus a percentile-bootstrap 95% confidence interval.
///
/// Each of the `n_resamples` resamples draws `votes.len()` votes with
/// replacement from its own deterministic substream, so results are
/// reproducible for a given seed and invariant to thread count.
pub fn bootstrap_net_win(
    votes: &[i8],
    n_resamples: usize,
    seed: u64,
) -> Result<PairwiseResult, BootstrapError> {
    if votes.is_empty() {
        return Err(BootstrapError::Empty);
    }
    if n_resamples == 0 {
        return Err(BootstrapError::NoResamples);
    }
    if let Some((index, &value)) = votes
        .iter()
        .enumerate()
        .find(|(_, v)| !matches!(v, -1 | 0 | 1))
    {
        return Err(BootstrapError::BadVote { index, value });
    }

    let n = votes.len();
    let mut rates = Vec::with_capacity(n_resamples);
    for k in 0..n_resamples {
        let mut rng = substream_rng(seed, streams::BOOTSTRAP, k as u64);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += votes[rng.random_range(0..n)] as f64;
        }
        rates.push(100.0 * sum / n as f64);
    }
    rates.sort_by(f64::total_cmp);
    let ci_low = percentile(&rates, 2.5).expect("non-empty rates");
    let ci_high = percentile(&rates, 97.5).expect("non-empty rates");

    Ok(PairwiseResult {
        schema_version: SCHEMA_VERSION,
        net_win_rate: net_rate(votes),
        ci_low,
        ci_high,
        n_pairs: n,
        n_resamples,
    })
}
