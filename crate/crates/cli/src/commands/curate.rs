use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::Serialize;

use audioaes::curation::{
    apply_prompting, filter_manifest, inference_prefix, pseudo_label, quality_prefix,
};
use audioaes::manifest::{read_manifest, write_manifest, ManifestEntry, SCHEMA_VERSION};
use audioaes::model::load_checkpoint;
use audioaes::scores::Axis;

use crate::commands::{manifest_base, parse_axis, positive_jobs, write_json};
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Subcommand)]
pub enum CurateCommand {
    /// Drop entries scoring below a percentile threshold
    Filter(FilterArgs),
    /// Prefix captions with rounded quality scores
    Prompt(PromptArgs),
    /// Score unlabeled entries with a trained model
    PseudoLabel(PseudoLabelArgs),
}

#[derive(Args)]
pub struct FilterArgs {
    /// Manifest to filter (every entry scored on the chosen axis)
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Axis the threshold applies to: PQ, PC, CE, or CU [default: PQ]
    #[arg(long, value_name = "AXIS")]
    axis: Option<String>,

    /// Percentile below which entries are dropped (e.g. 25 or 50)
    #[arg(long, value_name = "P")]
    percentile: Option<f64>,

    /// Filtered manifest to write
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Also write the filter report as JSON
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args)]
pub struct PromptArgs {
    /// Captioned, scored manifest to rewrite
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Axis supplying the quality score [default: PQ]
    #[arg(long, value_name = "AXIS")]
    axis: Option<String>,

    /// Rounding granularity r: scores snap to the 1/r grid (e.g. 2 or 5)
    /// [default: 2]
    #[arg(long, value_name = "R")]
    rounding: Option<u32>,

    /// Emit one fixed prefix from the score distribution instead of
    /// rewriting captions
    #[arg(long)]
    inference: bool,

    /// Percentile of the score distribution the fixed prefix quotes
    /// (e.g. 50, 75, or 90); only with --inference [default: 50]
    #[arg(long, value_name = "P", requires = "inference")]
    percentile: Option<f64>,

    /// Rewritten manifest (caption mode) or prefix JSON (--inference)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PseudoLabelArgs {
    /// Manifest whose unscored entries get model predictions
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Trained checkpoint to score with
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,

    /// Labeled manifest to write
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Replace scores that are already present
    #[arg(long)]
    overwrite: bool,

    /// Worker threads; any setting produces identical scores [default: 1]
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,

    /// Also write the labeling report as JSON
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

pub fn run(cmd: CurateCommand, cfg: &FileConfig) -> Result<(), CliError> {
    match cmd {
        CurateCommand::Filter(args) => run_filter(args, cfg),
        CurateCommand::Prompt(args) => run_prompt(args, cfg),
        CurateCommand::PseudoLabel(args) => run_pseudo_label(args, cfg),
    }
}

fn run_filter(args: FilterArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let manifest: PathBuf = cfg.require(args.manifest, "manifest")?;
    let axis = parse_axis(&cfg.resolve(args.axis, "axis", "PQ".into())?)?;
    let percentile: f64 = cfg.require(args.percentile, "percentile")?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    let report_path = cfg.resolve_opt(args.report, "report")?;

    let entries = read_manifest(&manifest)?;
    let (kept, report) = filter_manifest(&entries, axis, percentile)?;
    write_manifest(&out, &kept)?;
    if let Some(path) = &report_path {
        write_json(path, &report)?;
    }
    println!(
        "{} percentile {percentile}: threshold {:.4}, kept {} of {} -> {}",
        report.axis,
        report.threshold,
        report.kept,
        entries.len(),
        out.display()
    );
    Ok(())
}

/// Prefix document written by `curate prompt --inference`.
#[derive(Serialize)]
struct PrefixOutput {
    schema_version: u32,
    axis: &'static str,
    rounding: u32,
    percentile: f64,
    prefix: String,
}

fn axis_scores(entries: &[ManifestEntry], axis: Axis) -> Result<Vec<f64>, CliError> {
    let missing: Vec<String> = entries
        .iter()
        .filter(|e| e.axis_score(axis).is_none())
        .map(|e| e.audio_path.clone())
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&String> = missing.iter().take(8).collect();
        return Err(CliError::Data(format!(
            "{} entries lack a {} score; first offenders: {shown:?}",
            missing.len(),
            axis.name()
        )));
    }
    Ok(entries
        .iter()
        .map(|e| e.axis_score(axis).unwrap())
        .collect())
}

fn run_prompt(args: PromptArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let manifest: PathBuf = cfg.require(args.manifest, "manifest")?;
    let axis = parse_axis(&cfg.resolve(args.axis, "axis", "PQ".into())?)?;
    let rounding = cfg.resolve(args.rounding, "rounding", 2)?;
    let inference = cfg.resolve_flag(args.inference, "inference")?;

    let entries = read_manifest(&manifest)?;

    if inference {
        let percentile = cfg.resolve(args.percentile, "percentile", 50.0)?;
        let scores = axis_scores(&entries, axis)?;
        let prefix = inference_prefix(&scores, rounding, percentile)?;
        println!("{prefix}");
        if let Some(out) = cfg.resolve_opt(args.out, "out")? {
            write_json(
                &out,
                &PrefixOutput {
                    schema_version: SCHEMA_VERSION,
                    axis: axis.name(),
                    rounding,
                    percentile,
                    prefix,
                },
            )?;
        }
        return Ok(());
    }

    let out: PathBuf = cfg.require(args.out, "out")?;
    // Check scores up front so the error lists every offender, not just
    // the first entry hit.
    axis_scores(&entries, axis)?;
    let missing_captions: Vec<&String> = entries
        .iter()
        .filter(|e| e.caption.is_none())
        .map(|e| &e.audio_path)
        .take(8)
        .collect();
    if !missing_captions.is_empty() {
        return Err(CliError::Data(format!(
            "entries lack captions; first offenders: {missing_captions:?}"
        )));
    }

    let mut rewritten = entries;
    for entry in &mut rewritten {
        let score = entry.axis_score(axis).unwrap();
        let prefix = quality_prefix(score, rounding)?;
        let caption = entry.caption.as_deref().unwrap();
        entry.caption = Some(apply_prompting(&prefix, caption)?);
    }
    write_manifest(&out, &rewritten)?;
    println!(
        "prefixed {} captions with {} scores on the 1/{rounding} grid -> {}",
        rewritten.len(),
        axis.name(),
        out.display()
    );
    Ok(())
}

fn run_pseudo_label(args: PseudoLabelArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let manifest: PathBuf = cfg.require(args.manifest, "manifest")?;
    let checkpoint: PathBuf = cfg.require(args.checkpoint, "checkpoint")?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    let overwrite = cfg.resolve_flag(args.overwrite, "overwrite")?;
    let jobs = positive_jobs(cfg.resolve(args.jobs, "jobs", 1)?)?;
    let report_path = cfg.resolve_opt(args.report, "report")?;

    let entries = read_manifest(&manifest)?;
    let params = load_checkpoint(&checkpoint)?.params;
    let (labeled, report) = pseudo_label(&entries, &params, manifest_base(&manifest), overwrite, jobs);

    for f in &report.failed {
        eprintln!("warning: {}: {}", f.audio_path, f.error);
    }
    if report.labeled == 0 && !report.failed.is_empty() {
        return Err(CliError::Data(format!(
            "all {} unscored files failed to score",
            report.failed.len()
        )));
    }
    write_manifest(&out, &labeled)?;
    if let Some(path) = &report_path {
        write_json(path, &report)?;
    }
    println!(
        "labeled {}, kept {} existing, {} failed -> {}",
        report.labeled,
        report.skipped_existing,
        report.failed.len(),
        out.display()
    );
    Ok(())
}
