//! Per-output JSON manifests: stage, effective configuration and content
//! hashes of inputs and outputs. No timestamps, so reruns are identical.

use std::path::{Path, PathBuf};

use mstree_core::pipeline::PipelineConfig;
use mstree_core::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "mstree";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub stage: &'a str,
    pub seed: u64,
    pub config_sha256: String,
    pub config: &'a PipelineConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub notes: serde_json::Map<String, serde_json::Value>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn config_hash(cfg: &PipelineConfig) -> Result<String> {
    let json = serde_json::to_vec(cfg)?;
    Ok(format!("{:x}", Sha256::digest(&json)))
}

fn hashes(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| Ok(FileHash { path: p.display().to_string(), sha256: sha256_file(p)? }))
        .collect()
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes `<primary>.manifest.json`, where `primary` is the first output.
pub fn write_manifest(
    stage: &str,
    cfg: &PipelineConfig,
    seed: u64,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    notes: serde_json::Map<String, serde_json::Value>,
) -> Result<PathBuf> {
    let m = Manifest {
        tool: TOOL,
        version: VERSION,
        stage,
        seed,
        config_sha256: config_hash(cfg)?,
        config: cfg,
        inputs: hashes(inputs)?,
        outputs: hashes(outputs)?,
        notes,
    };
    let path = manifest_path(&outputs[0]);
    std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(path)
}
