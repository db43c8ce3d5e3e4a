use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use audioaes::manifest::SCHEMA_VERSION;
use audioaes::training::{grad_check, GradCheckReport};

use crate::commands::parse_preset;
use crate::config::FileConfig;
use crate::errors::CliError;

#[derive(Args)]
pub struct GradCheckArgs {
    /// Model size to check; must be small enough for exhaustive finite
    /// differences [default: tiny]
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Seed for parameters and the probe batch [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Largest relative error accepted per coordinate [default: 1e-4]
    #[arg(long, value_name = "TOL")]
    tolerance: Option<f64>,

    /// Also write the check report as JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct GradCheckOutput {
    schema_version: u32,
    #[serde(flatten)]
    report: GradCheckReport,
}

pub fn run(args: GradCheckArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let enc = parse_preset(&cfg.resolve(args.preset, "preset", "tiny".into())?)?;
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let tolerance = cfg.resolve(args.tolerance, "tolerance", 1e-4)?;
    let out: Option<PathBuf> = cfg.resolve_opt(args.out, "out")?;

    let report = grad_check(&enc, seed, tolerance)?;
    println!(
        "checked {} coordinates ({} kink-skipped): max relative error {:.3e} at {}",
        report.checked, report.skipped_kinks, report.max_rel_err, report.worst_coordinate
    );
    if let Some(out) = &out {
        write_report(out, &report)?;
    }
    if !report.passed {
        let sample: Vec<&String> = report.failing.iter().map(|(name, _)| name).take(5).collect();
        return Err(CliError::Numeric(format!(
            "gradient check failed: {} coordinates exceed tolerance {:e}; worst offenders: {sample:?}",
            report.failing.len(),
            report.tolerance
        )));
    }
    println!("gradients match finite differences (tolerance {tolerance:e})");
    Ok(())
}

fn write_report(path: &std::path::Path, report: &GradCheckReport) -> Result<(), CliError> {
    crate::commands::write_json(
        path,
        &GradCheckOutput {
            schema_version: SCHEMA_VERSION,
            report: report.clone(),
        },
    )
}
