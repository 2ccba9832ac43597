//! Run manifest: every artifact under the output directory is listed with
//! its content hash, the command that produced it, the seeds it depended on,
//! and its inputs. No timestamps, so runs with equal inputs and seeds yield
//! byte-identical manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub sha256: String,
    pub produced_by: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Result<Manifest, CliError> {
        let path = out_dir.join(MANIFEST_NAME);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let raw = std::fs::read_to_string(&path)
            .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| CliError::runtime(format!("corrupt manifest {}: {e}", path.display())))
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join(MANIFEST_NAME);
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        timer_core::fsio::atomic_write(&path, body.as_bytes())
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// Writes one artifact atomically under the output directory and records it
/// in the manifest.
pub struct ArtifactWriter {
    out_dir: PathBuf,
    command: String,
    manifest: Manifest,
}

impl ArtifactWriter {
    pub fn new(out_dir: &Path, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(ArtifactWriter {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            manifest: Manifest::load(out_dir)?,
        })
    }

    /// Writes `name` and upserts its manifest entry.
    pub fn write(
        &mut self,
        name: &str,
        bytes: &[u8],
        seeds: &[u64],
        inputs: &[String],
    ) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
        timer_core::fsio::atomic_write(&path, bytes)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.artifacts.insert(
            name.to_string(),
            ArtifactEntry {
                sha256: sha256_hex(bytes),
                produced_by: self.command.clone(),
                seeds: seeds.to_vec(),
                inputs: inputs.to_vec(),
            },
        );
        Ok(path)
    }

    /// Persists the updated manifest. Call once after all writes.
    pub fn finish(self) -> Result<(), CliError> {
        self.manifest.save(&self.out_dir)
    }
}

/// Canonical way to reference an input in a manifest entry: path plus its
/// current content hash. Paths under the output directory are recorded
/// relative to it, so reruns into fresh directories stay byte-identical.
pub fn input_ref(out_dir: &Path, path: &Path) -> String {
    let shown = path
        .strip_prefix(out_dir)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| path.display().to_string());
    match std::fs::read(path) {
        Ok(bytes) => format!("{shown}#sha256:{}", sha256_hex(&bytes)),
        Err(_) => format!("{shown}#unreadable"),
    }
}
