use std::path::PathBuf;

use clap::Args;

use audioaes::manifest::{read_jsonl, VoteRecord};
use audioaes::metrics::bootstrap_net_win;

use crate::commands::write_json;
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Args)]
pub struct PairwiseArgs {
    /// Vote lines {"vote": 1 | 0 | -1}: +1 system A wins, -1 system B,
    /// 0 tie
    #[arg(long, value_name = "FILE")]
    votes: Option<PathBuf>,

    /// Bootstrap resamples behind the confidence interval [default: 1000]
    #[arg(long, value_name = "N")]
    resamples: Option<usize>,

    /// Seed for the resampling draws [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Also write the result as JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub fn run(args: PairwiseArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let votes_path: PathBuf = cfg.require(args.votes, "votes")?;
    let resamples = cfg.resolve(args.resamples, "resamples", 1000)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let out: Option<PathBuf> = cfg.resolve_opt(args.out, "out")?;

    let votes: Vec<i8> = read_jsonl::<VoteRecord>(&votes_path)?
        .into_iter()
        .map(|r| r.vote)
        .collect();
    let result = bootstrap_net_win(&votes, resamples, seed)?;
    println!(
        "net win rate {:.1}% CI [{:.1}%, {:.1}%] over {} pairs ({} resamples)",
        result.net_win_rate, result.ci_low, result.ci_high, result.n_pairs, result.n_resamples
    );
    if let Some(out) = out {
        write_json(&out, &result)?;
    }
    Ok(())
}
