//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset 0   8 bytes   magic "AESCKPT\0"
//! offset 8   4 bytes   u32 container version (currently 1)
//! offset 12  8 bytes   u64 header length H
//! offset 20  H bytes   JSON header (UTF-8)
//! ...        payload   every array from the header's `arrays` list,
//!                      in order, as packed little-endian f64
//! last 32 bytes        SHA-256 digest of every preceding byte
//! ```
//!
//! The JSON header carries the encoder config, the target normalizer, an
//! optional training-state marker, and the array manifest: `{"name",
//! "len"}` per array. Model arrays appear in the canonical parameter
//! visit order (see `ParamTensors::visit`); when optimizer state is
//! included, two extra arrays `adam.m` and `adam.v` follow, each holding
//! one value per model parameter in the same flat order, and the header's
//! `train_state.step` records how many optimizer steps have been applied.
//! Writes go to a sibling temp file first and are renamed into place.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{EncoderConfig, ModelError, ModelParams, Normalizer};

const MAGIC: &[u8; 8] = b"AESCKPT\0";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot write checkpoint {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read checkpoint {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found}; this build reads version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("checkpoint is corrupt: checksum mismatch")]
    ChecksumMismatch,
    #[error("checkpoint header invalid: {detail}")]
    HeaderInvalid { detail: String },
    #[error("array `{name}` holds {found} values, expected {expected}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Optimizer state carried alongside parameters so an interrupted run can
/// resume on the exact trajectory: first/second Adam moments in flat
/// parameter order, plus the number of completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl TrainState {
    pub fn fresh(num_params: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }
}

/// Everything a checkpoint file holds.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub train_state: Option<TrainState>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: EncoderConfig,
    normalizer: Normalizer,
    train_state: Option<HeaderTrainState>,
    arrays: Vec<ArrayEntry>,
}

#[derive(Serialize, Deserialize)]
struct HeaderTrainState {
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

/// Write `params` (and optionally optimizer state) to `path`, atomically.
pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    train_state: Option<&TrainState>,
) -> Result<(), CheckpointError> {
    params.cfg.validate()?;
    params.normalizer.validate()?;
    let num_params = params.tensors.num_params();
    if let Some(ts) = train_state {
        for (name, len) in [("adam.m", ts.m.len()), ("adam.v", ts.v.len())] {
            if len != num_params {
                return Err(CheckpointError::ShapeMismatch {
                    name: name.into(),
                    expected: num_params,
                    found: len,
                });
            }
        }
    }

    let mut arrays = Vec::new();
    params
        .tensors
        .visit(&mut |name, v| arrays.push(ArrayEntry {
            name: name.to_string(),
            len: v.len(),
        }));
    if train_state.is_some() {
        arrays.push(ArrayEntry {
            name: "adam.m".into(),
            len: num_params,
        });
        arrays.push(ArrayEntry {
            name: "adam.v".into(),
            len: num_params,
        });
    }
    let header = Header {
        config: params.cfg,
        normalizer: params.normalizer.clone(),
        train_state: train_state.map(|ts| HeaderTrainState { step: ts.step }),
        arrays,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| CheckpointError::HeaderInvalid { detail: e.to_string() })?;

    let mut buf = Vec::with_capacity(20 + header_bytes.len() + num_params * 8 + DIGEST_LEN);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_bytes);
    params.tensors.visit(&mut |_, v| {
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    });
    if let Some(ts) = train_state {
        for x in ts.m.iter().chain(ts.v.iter()) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);

    let tmp = sibling_temp_path(path);
    let write_err = |source| CheckpointError::Write {
        path: path.to_path_buf(),
        source,
    };
    std::fs::write(&tmp, &buf).map_err(write_err)?;
    std::fs::rename(&tmp, path).map_err(write_err)
}

fn sibling_temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Read and verify a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let read_err = |source| CheckpointError::Read {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(read_err)?;

    if bytes.len() < 20 + DIGEST_LEN || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let body_len = bytes.len() - DIGEST_LEN;
    let digest = Sha256::digest(&bytes[..body_len]);
    if digest.as_slice() != &bytes[body_len..] {
        return Err(CheckpointError::ChecksumMismatch);
    }

    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let header_end = 20usize
        .checked_add(header_len)
        .filter(|&end| end <= body_len)
        .ok_or_else(|| CheckpointError::HeaderInvalid {
            detail: "declared header length exceeds file size".into(),
        })?;
    let header: Header = serde_json::from_slice(&bytes[20..header_end])
        .map_err(|e| CheckpointError::HeaderInvalid { detail: e.to_string() })?;
    header.config.validate()?;
    header.normalizer.validate()?;

    // Build a parameter skeleton for the declared config, then fill every
    // array from the payload, enforcing the canonical order.
    let mut params = ModelParams::init(&header.config, 0)?;
    params.normalizer = header.normalizer.clone();
    let num_params = params.tensors.num_params();

    let mut expected = Vec::new();
    params
        .tensors
        .visit(&mut |name, v| expected.push((name.to_string(), v.len())));
    if header.train_state.is_some() {
        expected.push(("adam.m".into(), num_params));
        expected.push(("adam.v".into(), num_params));
    }
    if header.arrays.len() != expected.len() {
        return Err(CheckpointError::HeaderInvalid {
            detail: format!(
                "array manifest lists {} arrays, config implies {}",
                header.arrays.len(),
                expected.len()
            ),
        });
    }
    let mut payload_len = 0usize;
    for (entry, (name, len)) in header.arrays.iter().zip(&expected) {
        if &entry.name != name {
            return Err(CheckpointError::HeaderInvalid {
                detail: format!("array `{}` out of order, expected `{}`", entry.name, name),
            });
        }
        if entry.len != *len {
            return Err(CheckpointError::ShapeMismatch {
                name: entry.name.clone(),
                expected: *len,
                found: entry.len,
            });
        }
        payload_len += len * 8;
    }
    if body_len - header_end != payload_len {
        return Err(CheckpointError::HeaderInvalid {
            detail: format!(
                "payload holds {} bytes, manifest implies {}",
                body_len - header_end,
                payload_len
            ),
        });
    }

    let mut cursor = header_end;
    let mut next_array = |len: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(f64::from_le_bytes(
                bytes[cursor..cursor + 8].try_into().unwrap(),
            ));
            cursor += 8;
        }
        out
    };
    params.tensors.visit_mut(&mut |_, v| {
        let vals = next_array(v.len());
        v.copy_from_slice(&vals);
    });
    let train_state = header.train_state.map(|ts| TrainState {
        step: ts.step,
        m: next_array(num_params),
        v: next_array(num_params),
    });

    Ok(Checkpoint {
        params,
        train_state,
    })
}
