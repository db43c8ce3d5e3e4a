//! `aes`: one binary exposing the whole pipeline — corpus synthesis,
//! training, prediction, evaluation, curation, rater screening, gradient
//! checking, and pairwise bootstrap analysis.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure. All randomness is controlled by `--seed`; rerunning any
//! subcommand with identical flags produces byte-identical output files.

mod commands;
mod config;
mod errors;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Parser)]
#[command(
    name = "aes",
    version,
    about = "Audio aesthetics pipeline: synthesize corpora, train and run the \
             four-axis scorer, and curate datasets with its predictions",
    propagate_version = true
)]
struct Cli {
    /// TOML file supplying defaults for any long flag (`steps = 2000`);
    /// explicit command-line values win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled corpus of degraded synthetic mixtures
    Synth(commands::synth::SynthArgs),
    /// Train the four-axis scorer on a labeled manifest
    Train(commands::train::TrainArgs),
    /// Score a clip or a whole manifest with a trained checkpoint
    Predict(commands::predict::PredictArgs),
    /// Correlate predictions against reference labels
    Eval(commands::eval::EvalArgs),
    /// Manifest curation: percentile filtering, quality prompting,
    /// pseudo-labeling
    #[command(subcommand)]
    Curate(commands::curate::CurateCommand),
    /// Screen a rater's answers against golden labels
    Qualify(commands::qualify::QualifyArgs),
    /// Verify analytic gradients against finite differences
    GradCheck(commands::grad_check::GradCheckArgs),
    /// Bootstrap net-win-rate interval over pairwise votes
    Pairwise(commands::pairwise::PairwiseArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; they are not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => commands::synth::run(args, &cfg),
        Command::Train(args) => commands::train::run(args, &cfg),
        Command::Predict(args) => commands::predict::run(args, &cfg),
        Command::Eval(args) => commands::eval::run(args, &cfg),
        Command::Curate(cmd) => commands::curate::run(cmd, &cfg),
        Command::Qualify(args) => commands::qualify::run(args, &cfg),
        Command::GradCheck(args) => commands::grad_check::run(args, &cfg),
        Command::Pairwise(args) => commands::pairwise::run(args, &cfg),
    }
}
