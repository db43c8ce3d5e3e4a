use std::path::{Path, PathBuf};

use clap::Args;

use audioaes::audio_io::{condition, load_wav, TARGET_SAMPLE_RATE};
use audioaes::manifest::{atomic_write, read_manifest, LabeledSample, SCHEMA_VERSION};
use audioaes::model::{save_checkpoint, NUM_AXES};
use audioaes::training::{train_run, TrainConfig, TrainLogRow, TrainingSet};

use crate::commands::{manifest_base, parse_axis, parse_preset};
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Args)]
pub struct TrainArgs {
    /// Labeled training manifest (JSON Lines; every axis scored)
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,

    /// Optimizer steps [default: 2000]
    #[arg(long, value_name = "N")]
    steps: Option<u64>,

    /// Seed for init, shuffling, and chunk draws [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Checkpoint file to write
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Model size: desk, tiny, or full [default: desk]
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Clips per optimizer step [default: 8]
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,

    /// Peak learning rate [default: 0.001]
    #[arg(long, value_name = "LR")]
    learning_rate: Option<f64>,

    /// Steps of linear warmup before linear decay [default: 200]
    #[arg(long, value_name = "N")]
    warmup_steps: Option<u64>,

    /// Longest audio chunk fed per clip per step, seconds [default: 10]
    #[arg(long, value_name = "SECONDS")]
    chunk_seconds: Option<f64>,

    /// Global-norm gradient clip; 0 disables clipping [default: 1]
    #[arg(long, value_name = "NORM")]
    grad_clip: Option<f64>,

    /// Axes to train, comma-separated [default: PQ,PC,CE,CU]
    #[arg(long, value_name = "LIST")]
    axes: Option<String>,

    /// Write a per-step CSV training log
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
}

fn parse_axes(list: &str) -> Result<[bool; NUM_AXES], CliError> {
    let mut axes = [false; NUM_AXES];
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        axes[parse_axis(token)?.index()] = true;
    }
    if !axes.iter().any(|&a| a) {
        return Err(CliError::Usage("--axes names no axis".into()));
    }
    Ok(axes)
}

fn write_csv_log(path: &Path, log: &[TrainLogRow]) -> Result<(), CliError> {
    use std::fmt::Write as _;
    let mut text = String::from(
        "schema_version,step,epoch,loss,loss_pq,loss_pc,loss_ce,loss_cu,lr,grad_norm\n",
    );
    for row in log {
        let [pq, pc, ce, cu] = row.per_axis;
        let _ = writeln!(
            text,
            "{SCHEMA_VERSION},{},{},{},{pq},{pc},{ce},{cu},{},{}",
            row.step, row.epoch, row.loss, row.lr, row.grad_norm
        );
    }
    atomic_write(path, text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn run(args: TrainArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let manifest_path: PathBuf = cfg.require(args.manifest, "manifest")?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    let preset_name = cfg.resolve(args.preset, "preset", "desk".into())?;
    let enc = parse_preset(&preset_name)?;
    let defaults = TrainConfig::default();
    let grad_clip = match cfg.resolve(args.grad_clip, "grad-clip", 1.0)? {
        0.0 => None,
        g => Some(g),
    };
    let train_cfg = TrainConfig {
        learning_rate: cfg.resolve(args.learning_rate, "learning-rate", defaults.learning_rate)?,
        batch_size: cfg.resolve(args.batch_size, "batch-size", defaults.batch_size)?,
        steps: cfg.resolve(args.steps, "steps", defaults.steps)?,
        warmup_steps: cfg.resolve(args.warmup_steps, "warmup-steps", defaults.warmup_steps)?,
        seed: cfg.resolve(args.seed, "seed", 0)?,
        chunk_seconds: cfg.resolve(args.chunk_seconds, "chunk-seconds", defaults.chunk_seconds)?,
        grad_clip,
        axes: parse_axes(&cfg.resolve(args.axes, "axes", "PQ,PC,CE,CU".into())?)?,
        ..defaults
    };
    let log_path = cfg.resolve_opt(args.log, "log")?;

    let entries = read_manifest(&manifest_path)?;
    let origin = manifest_path.display().to_string();
    let base = manifest_base(&manifest_path);
    let mut waves = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    for entry in &entries {
        let sample = LabeledSample::from_entry(entry, &origin)?;
        let clip = load_wav(entry.resolve_audio_path(base))?;
        waves.push(condition(&clip).samples);
        labels.push(sample.scores);
    }
    let set = TrainingSet::new(waves, labels, TARGET_SAMPLE_RATE)?;
    println!(
        "training {preset_name} preset on {} clips: {} steps, batch {}, seed {}",
        set.len(),
        train_cfg.steps,
        train_cfg.batch_size,
        train_cfg.seed
    );

    let outcome = train_run(&set, &enc, &train_cfg)?;

    save_checkpoint(&out, &outcome.params, Some(&outcome.state))?;
    if let Some(path) = &log_path {
        write_csv_log(path, &outcome.log)?;
    }

    // A handful of waypoints instead of a step-by-step stream.
    let stride = (outcome.log.len() / 10).max(1);
    for row in outcome.log.iter().step_by(stride) {
        println!(
            "  step {:>6}  epoch {:>4}  loss {:>10.4}  lr {:.6}",
            row.step, row.epoch, row.loss, row.lr
        );
    }
    if let Some(last) = outcome.log.last() {
        println!("final loss {:.4} after {} steps", last.loss, last.step);
    }
    println!("checkpoint -> {}", out.display());

    if let Some(step) = outcome.diverged_at {
        return Err(CliError::Numeric(format!(
            "training diverged at step {step}; the checkpoint holds the last finite parameters"
        )));
    }
    Ok(())
}
