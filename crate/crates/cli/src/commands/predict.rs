use std::path::PathBuf;

use clap::Args;

use audioaes::audio_io::load_wav;
use audioaes::inference::{batch_predict, sliding_window_predict};
use audioaes::manifest::{read_manifest, write_jsonl, PredictionRecord, SCHEMA_VERSION};
use audioaes::model::load_checkpoint;

use crate::commands::{manifest_base, positive_jobs};
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Args)]
pub struct PredictArgs {
    /// Trained checkpoint to score with
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,

    /// One WAV file to score
    #[arg(long, value_name = "FILE", conflicts_with = "manifest")]
    input: Option<PathBuf>,

    /// Manifest of files to score (JSON Lines)
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Predictions file (JSON Lines); required with --manifest
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Worker threads; any setting produces identical scores [default: 1]
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

pub fn run(args: PredictArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let checkpoint_path: PathBuf = cfg.require(args.checkpoint, "checkpoint")?;
    let input = cfg.resolve_opt(args.input, "input")?;
    let manifest = cfg.resolve_opt(args.manifest, "manifest")?;
    let out: Option<PathBuf> = cfg.resolve_opt(args.out, "out")?;
    let jobs = positive_jobs(cfg.resolve(args.jobs, "jobs", 1)?)?;

    let params = load_checkpoint(&checkpoint_path)?.params;

    match (input, manifest) {
        (Some(path), None) => {
            let clip = load_wav(&path)?;
            let pred = sliding_window_predict(&clip, &params)?;
            let s = pred.scores;
            println!(
                "{} PQ={:.3} PC={:.3} CE={:.3} CU={:.3}",
                path.display(),
                s.pq,
                s.pc,
                s.ce,
                s.cu
            );
            if let Some(out) = out {
                let record = PredictionRecord {
                    schema_version: SCHEMA_VERSION,
                    audio_path: path.display().to_string(),
                    pq: s.pq,
                    pc: s.pc,
                    ce: s.ce,
                    cu: s.cu,
                    window_count: pred.window_count,
                    system_id: None,
                };
                write_jsonl(&out, std::slice::from_ref(&record))?;
            }
            Ok(())
        }
        (None, Some(path)) => {
            let out = out.ok_or_else(|| {
                CliError::Usage("--out is required when predicting a manifest".into())
            })?;
            let entries = read_manifest(&path)?;
            let outcome = batch_predict(&entries, &params, manifest_base(&path), jobs);
            for f in &outcome.failures {
                eprintln!("warning: {}: {}", f.audio_path, f.error);
            }
            if outcome.predictions.is_empty() && !entries.is_empty() {
                return Err(CliError::Data(format!(
                    "all {} files failed to score",
                    entries.len()
                )));
            }
            write_jsonl(&out, &outcome.predictions)?;
            println!(
                "scored {}/{} files -> {}",
                outcome.predictions.len(),
                entries.len(),
                out.display()
            );
            Ok(())
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--input and --manifest are mutually exclusive".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "one of --input or --manifest is required".into(),
        )),
    }
}
