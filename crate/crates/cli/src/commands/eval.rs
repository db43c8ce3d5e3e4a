use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use audioaes::manifest::{
    read_jsonl, read_manifest, read_scalar_scores, LabeledSample, PredictionRecord,
    SCHEMA_VERSION,
};
use audioaes::metrics::{axis_correlation_matrix, eval_report, pearson, sys_srcc, EvalReport};
use audioaes::model::NUM_AXES;
use audioaes::scores::{AesScores, Axis};

use crate::commands::{parse_axis, write_json};
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Args)]
pub struct EvalArgs {
    /// Four-axis predictions (JSON Lines, as written by `aes predict`)
    #[arg(long, value_name = "FILE", conflicts_with = "pred_scalar")]
    pred: Option<PathBuf>,

    /// Third-party predictions as (path, score) lines; needs --axis
    #[arg(long, value_name = "FILE")]
    pred_scalar: Option<PathBuf>,

    /// Axis the scalar predictions target [default: PQ]
    #[arg(long, value_name = "AXIS")]
    axis: Option<String>,

    /// Reference labels: manifest with every axis scored
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,

    /// Also rank systems: per-axis Spearman over per-system means
    #[arg(long)]
    per_system: bool,

    /// Also report the 4x4 Pearson matrix between axes
    #[arg(long)]
    axis_matrix: bool,

    /// Report file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Report file format: json, csv, or text [default: json]
    #[arg(long, value_name = "FORMAT")]
    format: Option<String>,
}

/// Report document: the evaluation report plus optional axis matrices.
#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_matrix_pred: Option<[[f64; NUM_AXES]; NUM_AXES]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_matrix_truth: Option<[[f64; NUM_AXES]; NUM_AXES]>,
}

#[derive(Serialize)]
struct ScalarEvalOutput {
    schema_version: u32,
    axis: &'static str,
    n_utterances: usize,
    utt_pcc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sys_srcc: Option<f64>,
}

fn matrix_text(title: &str, m: &[[f64; NUM_AXES]; NUM_AXES]) -> String {
    let mut out = format!("{title}\n      ");
    for axis in Axis::ALL {
        let _ = write!(out, "{:>8}", axis.name());
    }
    out.push('\n');
    for (i, axis) in Axis::ALL.iter().enumerate() {
        let _ = write!(out, "{:<6}", axis.name());
        for v in m[i] {
            let _ = write!(out, "{v:>8.4}");
        }
        out.push('\n');
    }
    out
}

fn matrix_csv(name: &str, m: &[[f64; NUM_AXES]; NUM_AXES]) -> String {
    let mut out = String::new();
    for (i, axis) in Axis::ALL.iter().enumerate() {
        let _ = write!(out, "{name},{}", axis.name());
        for v in m[i] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Labels keyed by audio path, with their optional system ids.
fn label_index(
    path: &PathBuf,
) -> Result<BTreeMap<String, (AesScores, Option<String>)>, CliError> {
    let origin = path.display().to_string();
    let mut by_path = BTreeMap::new();
    for entry in read_manifest(path)? {
        let sample = LabeledSample::from_entry(&entry, &origin)?;
        by_path.insert(sample.audio_path.clone(), (sample.scores, sample.system_id));
    }
    Ok(by_path)
}

fn missing_label_error(missing: &[&str], total: usize) -> CliError {
    let shown: Vec<&str> = missing.iter().take(8).copied().collect();
    CliError::Data(format!(
        "{} of {total} predictions have no label; first offenders: {shown:?}",
        missing.len()
    ))
}

pub fn run(args: EvalArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let labels_path: PathBuf = cfg.require(args.labels, "labels")?;
    let per_system = cfg.resolve_flag(args.per_system, "per-system")?;
    let axis_matrix = cfg.resolve_flag(args.axis_matrix, "axis-matrix")?;
    let out: Option<PathBuf> = cfg.resolve_opt(args.out, "out")?;
    let format = cfg.resolve(args.format, "format", "json".into())?;
    if !matches!(format.as_str(), "json" | "csv" | "text") {
        return Err(CliError::Usage(format!(
            "unknown format {format:?}; expected json, csv, or text"
        )));
    }
    let pred = cfg.resolve_opt(args.pred, "pred")?;
    let pred_scalar = cfg.resolve_opt(args.pred_scalar, "pred-scalar")?;

    match (pred, pred_scalar) {
        (Some(path), None) => run_four_axis(
            &path,
            &labels_path,
            per_system,
            axis_matrix,
            out.as_deref(),
            &format,
        ),
        (None, Some(path)) => {
            if axis_matrix {
                return Err(CliError::Usage(
                    "--axis-matrix needs four-axis predictions (--pred)".into(),
                ));
            }
            let axis = parse_axis(&cfg.resolve(args.axis, "axis", "PQ".into())?)?;
            run_scalar(&path, &labels_path, axis, per_system, out.as_deref(), &format)
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--pred and --pred-scalar are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "one of --pred or --pred-scalar is required".into(),
        )),
    }
}

fn run_four_axis(
    pred_path: &PathBuf,
    labels_path: &PathBuf,
    per_system: bool,
    axis_matrix: bool,
    out: Option<&std::path::Path>,
    format: &str,
) -> Result<(), CliError> {
    let preds: Vec<PredictionRecord> = read_jsonl(pred_path)?;
    let labels = label_index(labels_path)?;

    let mut pairs = Vec::with_capacity(preds.len());
    let mut missing = Vec::new();
    for p in &preds {
        let Some((truth, label_system)) = labels.get(&p.audio_path) else {
            missing.push(p.audio_path.as_str());
            continue;
        };
        let system = label_system.clone().or_else(|| p.system_id.clone());
        pairs.push((p.scores(), *truth, system));
    }
    if !missing.is_empty() {
        return Err(missing_label_error(&missing, preds.len()));
    }

    if per_system {
        let unsystemed = pairs.iter().filter(|(_, _, s)| s.is_none()).count();
        if unsystemed > 0 {
            return Err(CliError::Data(format!(
                "--per-system needs a system_id on every pair; {unsystemed} lack one"
            )));
        }
    } else {
        for pair in &mut pairs {
            pair.2 = None;
        }
    }

    let report = eval_report(&pairs)?;
    let (mut m_pred, mut m_truth) = (None, None);
    if axis_matrix {
        let pred_scores: Vec<AesScores> = pairs.iter().map(|(p, _, _)| *p).collect();
        let truth_scores: Vec<AesScores> = pairs.iter().map(|(_, t, _)| *t).collect();
        m_pred = Some(axis_correlation_matrix(&pred_scores)?);
        m_truth = Some(axis_correlation_matrix(&truth_scores)?);
    }

    print!("{}", report.to_text());
    if let (Some(mp), Some(mt)) = (&m_pred, &m_truth) {
        print!("{}", matrix_text("axis correlation (predictions)", mp));
        print!("{}", matrix_text("axis correlation (labels)", mt));
    }

    if let Some(out) = out {
        let doc = EvalOutput {
            report,
            axis_matrix_pred: m_pred,
            axis_matrix_truth: m_truth,
        };
        match format {
            "json" => write_json(out, &doc)?,
            "csv" => {
                let mut text = doc.report.to_csv();
                if let (Some(mp), Some(mt)) = (&doc.axis_matrix_pred, &doc.axis_matrix_truth) {
                    text.push_str(&matrix_csv("axis_matrix_pred", mp));
                    text.push_str(&matrix_csv("axis_matrix_truth", mt));
                }
                write_text(out, &text)?;
            }
            _ => {
                let mut text = doc.report.to_text();
                if let (Some(mp), Some(mt)) = (&doc.axis_matrix_pred, &doc.axis_matrix_truth) {
                    text.push_str(&matrix_text("axis correlation (predictions)", mp));
                    text.push_str(&matrix_text("axis correlation (labels)", mt));
                }
                write_text(out, &text)?;
            }
        }
        println!("report -> {}", out.display());
    }
    Ok(())
}

fn run_scalar(
    pred_path: &PathBuf,
    labels_path: &PathBuf,
    axis: Axis,
    per_system: bool,
    out: Option<&std::path::Path>,
    format: &str,
) -> Result<(), CliError> {
    let preds = read_scalar_scores(pred_path)?;
    let labels = label_index(labels_path)?;

    let mut xs = Vec::with_capacity(preds.len());
    let mut ys = Vec::with_capacity(preds.len());
    let mut pred_sys = Vec::with_capacity(preds.len());
    let mut truth_sys = Vec::with_capacity(preds.len());
    let mut missing = Vec::new();
    for p in &preds {
        let Some((truth, label_system)) = labels.get(&p.path) else {
            missing.push(p.path.as_str());
            continue;
        };
        let y = truth.to_array()[axis.index()];
        xs.push(p.score);
        ys.push(y);
        if let Some(sys) = label_system.clone().or_else(|| p.system_id.clone()) {
            pred_sys.push((sys.clone(), p.score));
            truth_sys.push((sys, y));
        }
    }
    if !missing.is_empty() {
        return Err(missing_label_error(&missing, preds.len()));
    }

    let r = pearson(&xs, &ys)?;
    let sys = if per_system {
        if pred_sys.len() != xs.len() {
            return Err(CliError::Data(format!(
                "--per-system needs a system_id on every pair; {} lack one",
                xs.len() - pred_sys.len()
            )));
        }
        Some(sys_srcc(&pred_sys, &truth_sys)?)
    } else {
        None
    };

    let doc = ScalarEvalOutput {
        schema_version: SCHEMA_VERSION,
        axis: axis.name(),
        n_utterances: xs.len(),
        utt_pcc: r,
        sys_srcc: sys,
    };
    print!(
        "utterances: {}\n{}  utt-PCC {:>8.4}",
        doc.n_utterances, doc.axis, doc.utt_pcc
    );
    match doc.sys_srcc {
        Some(s) => println!("  sys-SRCC {s:>8.4}"),
        None => println!(),
    }

    if let Some(out) = out {
        match format {
            "json" => write_json(out, &doc)?,
            "csv" => {
                let sys = doc.sys_srcc.map(|s| s.to_string()).unwrap_or_default();
                write_text(
                    out,
                    &format!("axis,utt_pcc,sys_srcc\n{},{},{sys}\n", doc.axis, doc.utt_pcc),
                )?;
            }
            _ => {
                let sys = doc
                    .sys_srcc
                    .map(|s| format!("  sys-SRCC {s:>8.4}"))
                    .unwrap_or_default();
                write_text(
                    out,
                    &format!(
                        "utterances: {}\n{}  utt-PCC {:>8.4}{sys}\n",
                        doc.n_utterances, doc.axis, doc.utt_pcc
                    ),
                )?;
            }
        }
        println!("report -> {}", out.display());
    }
    Ok(())
}

fn write_text(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    audioaes::manifest::atomic_write(path, text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
