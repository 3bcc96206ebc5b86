//! Model files: one JSON header line followed by the flat f64 parameter
//! blob (little-endian, declared layer order).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use weanscope_core::nn::{ModelSpec, Network, TrainConfig, TrainedModel};

use crate::error::{PipelineError, Result};

pub const FORMAT: &str = "weanscope-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub seed: u64,
    pub config: TrainConfig,
    pub epoch: usize,
    pub n_params: usize,
    pub sha256: String,
}

pub fn encode_model(m: &TrainedModel) -> Vec<u8> {
    let blob = super::f64s_to_le(&m.network.params);
    let header = ModelHeader {
        format: FORMAT.into(),
        version: VERSION,
        spec: m.network.spec.clone(),
        seed: m.config.seed,
        config: m.config.clone(),
        epoch: m.epoch,
        n_params: m.network.params.len(),
        sha256: hex::encode(Sha256::digest(&blob)),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.extend_from_slice(&blob);
    out
}

pub fn decode_model(path: &Path, bytes: &[u8]) -> Result<TrainedModel> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| PipelineError::ChecksumMismatch("no header line".into()))?;
    // read the version first so newer headers with unknown fields fail cleanly
    let raw: serde_json::Value =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| PipelineError::format(path, format!("header: {e}")))?;
    if raw.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
        return Err(PipelineError::format(path, "not a weanscope model file"));
    }
    let version = raw
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| PipelineError::format(path, "header has no version"))? as u32;
    if version > VERSION {
        return Err(PipelineError::VersionMismatch {
            found: version,
            supported: VERSION,
        });
    }
    let header: ModelHeader =
        serde_json::from_value(raw).map_err(|e| PipelineError::format(path, format!("header: {e}")))?;
    let blob = &bytes[nl + 1..];
    if blob.len() != header.n_params * 8 {
        return Err(PipelineError::ChecksumMismatch(format!(
            "{} parameter bytes, header declares {}",
            blob.len(),
            header.n_params * 8
        )));
    }
    if hex::encode(Sha256::digest(blob)) != header.sha256 {
        return Err(PipelineError::ChecksumMismatch("parameter digest differs".into()));
    }
    let params = super::le_to_f64s(path, blob)?;
    let network = Network::from_params(&header.spec, params).map_err(|e| PipelineError::format(path, e))?;
    Ok(TrainedModel {
        network,
        config: header.config,
        epoch: header.epoch,
    })
}

pub fn save_model(path: &Path, m: &TrainedModel) -> Result<()> {
    super::write_bytes(path, &encode_model(m))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    decode_model(path, &super::read_bytes(path)?)
}
