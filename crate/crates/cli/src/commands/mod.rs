//! Subcommand implementations plus the small helpers they share.

pub mod curate;
pub mod eval;
pub mod grad_check;
pub mod pairwise;
pub mod predict;
pub mod qualify;
pub mod synth;
pub mod train;

use std::path::Path;

use audioaes::manifest::atomic_write;
use audioaes::model::EncoderConfig;
use audioaes::scores::Axis;

use crate::errors::CliError;

pub fn parse_axis(name: &str) -> Result<Axis, CliError> {
    match name.to_ascii_uppercase().as_str() {
        "PQ" => Ok(Axis::PQ),
        "PC" => Ok(Axis::PC),
        "CE" => Ok(Axis::CE),
        "CU" => Ok(Axis::CU),
        _ => Err(CliError::Usage(format!(
            "unknown axis {name:?}; expected PQ, PC, CE, or CU"
        ))),
    }
}

pub fn parse_preset(name: &str) -> Result<EncoderConfig, CliError> {
    match name {
        "desk" => Ok(EncoderConfig::desk()),
        "tiny" => Ok(EncoderConfig::tiny()),
        "full" => Ok(EncoderConfig::full()),
        _ => Err(CliError::Usage(format!(
            "unknown preset {name:?}; expected desk, tiny, or full"
        ))),
    }
}

/// Write a JSON document (pretty-printed, trailing newline) atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn positive_jobs(jobs: usize) -> Result<usize, CliError> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    Ok(jobs)
}

/// The directory a manifest's relative audio paths resolve against.
pub fn manifest_base(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}
