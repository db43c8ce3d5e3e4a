use std::path::PathBuf;

use clap::Args;

use audioaes::synthdata::build_corpus;

use crate::commands::positive_jobs;
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Args)]
pub struct SynthArgs {
    /// Number of clips to synthesize
    #[arg(long, value_name = "N")]
    count: Option<usize>,

    /// Root seed for all randomness
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Directory receiving the WAV files and manifest.jsonl
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads; any setting produces identical files [default: 1]
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

pub fn run(args: SynthArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let count: usize = cfg.require(args.count, "count")?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let out: PathBuf = cfg.require(args.out, "out")?;
    let jobs = positive_jobs(cfg.resolve(args.jobs, "jobs", 1)?)?;

    let summary = build_corpus(count, seed, &out, jobs)?;
    println!(
        "synthesized {count} clips -> {}",
        summary.manifest_path.display()
    );
    Ok(())
}
