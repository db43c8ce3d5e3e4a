//! Evaluation statistics: Pearson and Spearman correlation, utterance-
//! and system-level protocol metrics, the axis correlation matrix, rater
//! qualification, linear-interpolation percentiles, and bootstrap win-rate
//! intervals.

mod bootstrap;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::SCHEMA_VERSION;
use crate::model::NUM_AXES;
use crate::scores::{AesScores, Axis};

pub use bootstrap::{bootstrap_net_win, BootstrapError, PairwiseResult};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{side} input has zero variance; correlation is undefined")]
    ZeroVariance { side: &'static str },
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("need at least 2 distinct systems, got {got}")]
    TooFewSystems { got: usize },
    #[error("system sets differ: {detail}")]
    SystemMismatch { detail: String },
    #[error("empty input")]
    Empty,
    #[error("percentile {p} outside [0, 100]")]
    BadPercentile { p: f64 },
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFew {
            needed: 2,
            got: x.len(),
        });
    }
    Ok(())
}

/// Sample Pearson correlation. The (n−1) variance normalizations cancel,
/// so centered sums are used directly; the denominator is computed as
/// `sqrt(Σdx²·Σdy²)` in one square root.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sx2 = 0.0;
    let mut sy2 = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sx2 += dx * dx;
        sy2 += dy * dy;
    }
    if sx2 == 0.0 {
        return Err(MetricsError::ZeroVariance { side: "x" });
    }
    if sy2 == 0.0 {
        return Err(MetricsError::ZeroVariance { side: "y" });
    }
    Ok(sxy / (sx2 * sy2).sqrt())
}

/// Average ranks (1-based); tied values share the mean of their rank span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the mean rank of that span.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Per-axis utterance-level Pearson correlation between predictions and
/// ground truth.
pub fn utt_pcc(
    pred: &[AesScores],
    truth: &[AesScores],
) -> Result<[f64; NUM_AXES], MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut out = [0.0; NUM_AXES];
    for (i, slot) in out.iter_mut().enumerate() {
        let p: Vec<f64> = pred.iter().map(|s| s.to_array()[i]).collect();
        let t: Vec<f64> = truth.iter().map(|s| s.to_array()[i]).collect();
        *slot = pearson(&p, &t)?;
    }
    Ok(out)
}

/// System-level Spearman correlation: average utterance scores per
/// system (unweighted mean), then rank-correlate the system means.
/// Both lists must cover exactly the same set of systems.
pub fn sys_srcc(
    pred: &[(String, f64)],
    truth: &[(String, f64)],
) -> Result<f64, MetricsError> {
    let pred_means = per_system_means(pred);
    let truth_means = per_system_means(truth);
    let pred_systems: Vec<&String> = pred_means.keys().collect();
    let truth_systems: Vec<&String> = truth_means.keys().collect();
    if pred_systems != truth_systems {
        let only_pred: Vec<&str> = pred_means
            .keys()
            .filter(|k| !truth_means.contains_key(*k))
            .map(|s| s.as_str())
            .collect();
        let only_truth: Vec<&str> = truth_means
            .keys()
            .filter(|k| !pred_means.contains_key(*k))
            .map(|s| s.as_str())
            .collect();
        return Err(MetricsError::SystemMismatch {
            detail: format!(
                "only in predictions: {only_pred:?}; only in truth: {only_truth:?}"
            ),
        });
    }
    if pred_means.len() < 2 {
        return Err(MetricsError::TooFewSystems {
            got: pred_means.len(),
        });
    }
    let p: Vec<f64> = pred_means.values().copied().collect();
    let t: Vec<f64> = truth_means.values().copied().collect();
    spearman(&p, &t)
}

/// Unweighted mean score per system, keyed deterministically.
pub fn per_system_means(scores: &[(String, f64)]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (sys, v) in scores {
        let e = sums.entry(sys.clone()).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(k, (s, c))| (k, s / c as f64))
        .collect()
}

/// Symmetric 4×4 matrix of pairwise Pearson correlations between axes.
pub fn axis_correlation_matrix(
    labels: &[AesScores],
) -> Result<[[f64; NUM_AXES]; NUM_AXES], MetricsError> {
    let cols: Vec<Vec<f64>> = (0..NUM_AXES)
        .map(|a| labels.iter().map(|s| s.to_array()[a]).collect())
        .collect();
    let mut m = [[1.0; NUM_AXES]; NUM_AXES];
    for a in 0..NUM_AXES {
        for b in (a + 1)..NUM_AXES {
            let r = pearson(&cols[a], &cols[b])?;
            m[a][b] = r;
            m[b][a] = r;
        }
    }
    Ok(m)
}

/// Outcome of screening one rater against the golden set on one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualifyOutcome {
    pub passed: bool,
    /// Pearson r against the golden scores, when defined.
    pub r: Option<f64>,
    /// Why the rater failed, when they did.
    pub reason: Option<String>,
}

/// Default onboarding threshold for rater qualification.
pub const QUALIFY_THRESHOLD: f64 = 0.7;

/// Screen a rater: pass iff Pearson r against the golden scores strictly
/// exceeds `threshold`. Zero-variance (constant) rater answers fail with
/// a reason rather than erroring; a degenerate golden set is an error.
pub fn rater_qualify(
    rater: &[f64],
    golden: &[f64],
    threshold: f64,
) -> Result<QualifyOutcome, MetricsError> {
    match pearson(rater, golden) {
        Ok(r) => Ok(QualifyOutcome {
            passed: r > threshold,
            r: Some(r),
            reason: (r <= threshold)
                .then(|| format!("r = {r:.4} does not exceed threshold {threshold}")),
        }),
        Err(MetricsError::ZeroVariance { side: "x" }) => Ok(QualifyOutcome {
            passed: false,
            r: None,
            reason: Some("rater answers have zero variance".into()),
        }),
        Err(MetricsError::ZeroVariance { side: _ }) => {
            Err(MetricsError::ZeroVariance { side: "golden" })
        }
        Err(e) => Err(e),
    }
}

/// Linear-interpolation percentile of an empirical distribution: sort,
/// then interpolate between order statistics at position `p/100·(n−1)`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(MetricsError::BadPercentile { p });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Per-system mean scores on every axis, for report output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMeans {
    pub system_id: String,
    pub pred: [f64; NUM_AXES],
    pub truth: [f64; NUM_AXES],
    pub count: usize,
}

/// Full evaluation report over aligned (prediction, truth) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub n_utterances: usize,
    /// Utterance-level Pearson r per axis, in PQ, PC, CE, CU order.
    pub utt_pcc: [f64; NUM_AXES],
    /// System-level Spearman rho per axis, when system ids were given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sys_srcc: Option<[f64; NUM_AXES]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_systems: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_system: Option<Vec<SystemMeans>>,
}

/// Build an [`EvalReport`] from aligned pairs, with optional system ids
/// (all-or-nothing: system metrics appear only if every pair has one).
pub fn eval_report(
    pairs: &[(AesScores, AesScores, Option<String>)],
) -> Result<EvalReport, MetricsError> {
    if pairs.len() < 2 {
        return Err(MetricsError::TooFew {
            needed: 2,
            got: pairs.len(),
        });
    }
    let pred: Vec<AesScores> = pairs.iter().map(|(p, _, _)| *p).collect();
    let truth: Vec<AesScores> = pairs.iter().map(|(_, t, _)| *t).collect();
    let utt = utt_pcc(&pred, &truth)?;

    let all_systems = pairs.iter().all(|(_, _, s)| s.is_some());
    let (sys, n_systems, per_system) = if all_systems {
        let mut srcc = [0.0; NUM_AXES];
        for (a, slot) in srcc.iter_mut().enumerate() {
            let p: Vec<(String, f64)> = pairs
                .iter()
                .map(|(p, _, s)| (s.clone().unwrap(), p.to_array()[a]))
                .collect();
            let t: Vec<(String, f64)> = pairs
                .iter()
                .map(|(_, t, s)| (s.clone().unwrap(), t.to_array()[a]))
                .collect();
            *slot = sys_srcc(&p, &t)?;
        }
        // Per-system means for the report body.
        let mut by_sys: BTreeMap<String, (/*pred*/ [f64; 4], /*truth*/ [f64; 4], usize)> =
            BTreeMap::new();
        for (p, t, s) in pairs {
            let e = by_sys
                .entry(s.clone().unwrap())
                .or_insert(([0.0; 4], [0.0; 4], 0));
            for a in 0..NUM_AXES {
                e.0[a] += p.to_array()[a];
                e.1[a] += t.to_array()[a];
            }
            e.2 += 1;
        }
        let per: Vec<SystemMeans> = by_sys
            .into_iter()
            .map(|(system_id, (ps, ts, c))| SystemMeans {
                system_id,
                pred: std::array::from_fn(|a| ps[a] / c as f64),
                truth: std::array::from_fn(|a| ts[a] / c as f64),
                count: c,
            })
            .collect();
        (Some(srcc), Some(per.len()), Some(per))
    } else {
        (None, None, None)
    };

    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        n_utterances: pairs.len(),
        utt_pcc: utt,
        sys_srcc: sys,
        n_systems,
        per_system,
    })
}

impl EvalReport {
    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("utterances: {}\n", self.n_utterances));
        out.push_str("axis    utt-PCC");
        if self.sys_srcc.is_some() {
            out.push_str("   sys-SRCC");
        }
        out.push('\n');
        for (i, axis) in Axis::ALL.iter().enumerate() {
            out.push_str(&format!("{:<6} {:>8.4}", axis.name(), self.utt_pcc[i]));
            if let Some(s) = &self.sys_srcc {
                out.push_str(&format!("  {:>9.4}", s[i]));
            }
            out.push('\n');
        }
        if let Some(n) = self.n_systems {
            out.push_str(&format!("systems: {n}\n"));
        }
        out
    }

    /// CSV rows: axis, utt_pcc, sys_srcc (blank when absent).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,utt_pcc,sys_srcc\n");
        for (i, axis) in Axis::ALL.iter().enumerate() {
            let sys = self
                .sys_srcc
                .map(|s| format!("{}", s[i]))
                .unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", axis.name(), self.utt_pcc[i], sys));
        }
        out
    }
}
