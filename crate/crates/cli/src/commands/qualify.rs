use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use audioaes::manifest::{read_manifest, SCHEMA_VERSION};
use audioaes::metrics::{rater_qualify, QualifyOutcome, QUALIFY_THRESHOLD};
use audioaes::scores::Axis;

use crate::commands::write_json;
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Args)]
pub struct QualifyArgs {
    /// The candidate rater's answers (manifest lines with pq and pc)
    #[arg(long, value_name = "FILE")]
    rater: Option<PathBuf>,

    /// Golden reference labels the rater is screened against
    #[arg(long, value_name = "FILE")]
    golden: Option<PathBuf>,

    /// Pearson r each axis must strictly exceed [default: 0.7]
    #[arg(long, value_name = "R")]
    threshold: Option<f64>,

    /// Also write the screening result as JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Screening result: the rater passes only if both axes pass.
#[derive(Serialize)]
struct QualifyOutput {
    schema_version: u32,
    threshold: f64,
    n_items: usize,
    pq: QualifyOutcome,
    pc: QualifyOutcome,
    passed: bool,
}

/// The two screening axes, with the rater's and golden answers aligned
/// in golden order.
struct ScreeningVectors {
    n: usize,
    rater: [Vec<f64>; 2],
    golden: [Vec<f64>; 2],
}

const SCREEN_AXES: [Axis; 2] = [Axis::PQ, Axis::PC];

fn screening_vectors(
    rater_path: &PathBuf,
    golden_path: &PathBuf,
) -> Result<ScreeningVectors, CliError> {
    let golden_entries = read_manifest(golden_path)?;
    let rater_entries = read_manifest(rater_path)?;
    let rater_by_path: BTreeMap<&str, &audioaes::manifest::ManifestEntry> = rater_entries
        .iter()
        .map(|e| (e.audio_path.as_str(), e))
        .collect();

    let mut vectors = ScreeningVectors {
        n: golden_entries.len(),
        rater: [Vec::new(), Vec::new()],
        golden: [Vec::new(), Vec::new()],
    };
    let mut unanswered = Vec::new();
    for g in &golden_entries {
        let Some(r) = rater_by_path.get(g.audio_path.as_str()) else {
            unanswered.push(g.audio_path.as_str());
            continue;
        };
        for (i, axis) in SCREEN_AXES.into_iter().enumerate() {
            let g_score = g.axis_score(axis).ok_or_else(|| {
                CliError::Data(format!(
                    "golden entry {} lacks a {} score",
                    g.audio_path,
                    axis.name()
                ))
            })?;
            let r_score = r.axis_score(axis).ok_or_else(|| {
                CliError::Data(format!(
                    "rater answer for {} lacks a {} score",
                    g.audio_path,
                    axis.name()
                ))
            })?;
            vectors.golden[i].push(g_score);
            vectors.rater[i].push(r_score);
        }
    }
    if !unanswered.is_empty() {
        let shown: Vec<&str> = unanswered.iter().take(8).copied().collect();
        return Err(CliError::Data(format!(
            "rater answered {} of {} golden items; first missing: {shown:?}",
            vectors.n - unanswered.len(),
            vectors.n
        )));
    }
    Ok(vectors)
}

fn outcome_line(axis: Axis, outcome: &QualifyOutcome) -> String {
    let verdict = if outcome.passed { "pass" } else { "fail" };
    match (outcome.r, &outcome.reason) {
        (Some(r), _) => format!("{axis}: r={r:.4} -> {verdict}"),
        (None, Some(reason)) => format!("{axis}: {reason} -> {verdict}"),
        (None, None) => format!("{axis}: -> {verdict}"),
    }
}

pub fn run(args: QualifyArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let rater: PathBuf = cfg.require(args.rater, "rater")?;
    let golden: PathBuf = cfg.require(args.golden, "golden")?;
    let threshold = cfg.resolve(args.threshold, "threshold", QUALIFY_THRESHOLD)?;
    let out: Option<PathBuf> = cfg.resolve_opt(args.out, "out")?;

    let v = screening_vectors(&rater, &golden)?;
    let pq = rater_qualify(&v.rater[0], &v.golden[0], threshold)?;
    let pc = rater_qualify(&v.rater[1], &v.golden[1], threshold)?;
    let passed = pq.passed && pc.passed;

    println!("{}", outcome_line(Axis::PQ, &pq));
    println!("{}", outcome_line(Axis::PC, &pc));
    println!(
        "overall: {} (threshold {threshold}, {} items)",
        if passed { "pass" } else { "fail" },
        v.n
    );

    if let Some(out) = out {
        write_json(
            &out,
            &QualifyOutput {
                schema_version: SCHEMA_VERSION,
                threshold,
                n_items: v.n,
                pq,
                pc,
                passed,
            },
        )?;
    }
    Ok(())
}
