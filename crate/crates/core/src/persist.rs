//! On-disk parameter format and run metadata.
//!
//! Parameter files are a single JSON header line naming the network-spec hash
//! and the vector length, followed by the raw values as little-endian 64-bit
//! floats. Run metadata is a JSON sidecar written next to each saved vector.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::train::{LrStage, Optimizer, TrainConfig};

#[derive(Serialize, Deserialize)]
struct ParamHeader {
    spec_hash: String,
    len: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write a parameter vector: JSON header line, then little-endian f64 bytes.
pub fn save_params(path: impl AsRef<Path>, params: &ParamVector, spec_hash: &str) -> Result<()> {
    let path = path.as_ref();
    params.validate_finite()?;
    let header = serde_json::to_string(&ParamHeader {
        spec_hash: spec_hash.to_string(),
        len: params.len(),
    })?;
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(header.as_bytes()).map_err(|e| io_err(path, e))?;
    file.write_all(b"\n").map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for value in params.as_slice() {
        bytes.extend_from_slice(&value.to_le_bytes());
    }
    file.write_all(&bytes).map_err(|e| io_err(path, e))
}

/// Read a parameter vector, checking the header against the expected spec
/// hash when one is supplied.
pub fn load_params(path: impl AsRef<Path>, expected_spec_hash: Option<&str>) -> Result<ParamVector> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw).map_err(|e| io_err(path, e))?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::InvalidConfig(format!("{}: missing header line", path.display())))?;
    let header: ParamHeader = serde_json::from_slice(&raw[..newline])?;
    if let Some(expected) = expected_spec_hash {
        if header.spec_hash != expected {
            return Err(Error::InvalidConfig(format!(
                "{}: spec hash mismatch (file {}, expected {expected})",
                path.display(),
                header.spec_hash
            )));
        }
    }
    let body = &raw[newline + 1..];
    if body.len() != header.len * 8 {
        return Err(Error::ShapeMismatch {
            context: "parameter file body",
            expected: header.len * 8,
            got: body.len(),
        });
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = ParamVector(values);
    params.validate_finite()?;
    Ok(params)
}

/// Everything needed to audit or replay a training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub batch_order_digest: String,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub lr_decay: Vec<LrStage>,
    pub spec_hash: String,
}

impl RunMetadata {
    pub fn from_config(config: &TrainConfig, batch_order_digest: &str, spec_hash: &str) -> Self {
        RunMetadata {
            seed: config.seed,
            batch_order_digest: batch_order_digest.to_string(),
            epochs: config.epochs,
            optimizer: config.optimizer,
            learning_rate: config.learning_rate,
            lr_decay: config.lr_decay.clone(),
            spec_hash: spec_hash.to_string(),
        }
    }
}

/// Write run metadata as pretty JSON beside a saved parameter file.
pub fn save_metadata(path: impl AsRef<Path>, metadata: &RunMetadata) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(metadata)?;
    std::fs::write(path, json).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip_bit_exact() {
        let params = ParamVector(vec![1.5, -2.25, 0.1, f64::MIN_POSITIVE, 1e300]);
        let dir = std::env::temp_dir();
        let path = dir.join(format!("influence_params_{}.bin", std::process::id()));
        save_params(&path, &params, "abc123").unwrap();
        let loaded = load_params(&path, Some("abc123")).unwrap();
        assert_eq!(params, loaded);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn spec_hash_mismatch_is_rejected() {
        let params = ParamVector(vec![1.0]);
        let dir = std::env::temp_dir();
        let path = dir.join(format!("influence_params_hash_{}.bin", std::process::id()));
        save_params(&path, &params, "right").unwrap();
        assert!(load_params(&path, Some("wrong")).is_err());
        assert!(load_params(&path, None).is_ok());
        std::fs::remove_file(&path).ok();
    }
}
