//! Per-stage manifests: inputs and outputs with their SHA-256 digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|_| CliError::Missing(path.to_path_buf()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Collects the files a stage reads and writes.
#[derive(Debug)]
pub struct Recorder {
    out: PathBuf,
    base: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(out: &Path, base: &Path) -> Self {
        Recorder { out: out.to_path_buf(), base: base.to_path_buf(), inputs: BTreeMap::new(), outputs: Vec::new() }
    }

    /// Paths inside the output tree are keyed relative to it, other inputs
    /// relative to the config directory, so manifests do not depend on where
    /// the tree lives.
    fn key(&self, path: &Path) -> String {
        let rel = path
            .strip_prefix(&self.out)
            .or_else(|_| path.strip_prefix(&self.base))
            .unwrap_or(path);
        rel.to_string_lossy().replace('\\', "/")
    }

    /// Registers an input file, failing with [`CliError::Missing`] if it is absent.
    pub fn input(&mut self, path: PathBuf) -> Result<PathBuf, CliError> {
        if !path.is_file() {
            return Err(CliError::Missing(path));
        }
        let digest = file_digest(&path)?;
        self.inputs.insert(self.key(&path), digest);
        Ok(path)
    }

    /// Registers in-memory input such as a bundled resource.
    pub fn input_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
    }

    /// Output path under the output tree; parent directories are created.
    pub fn output(&mut self, rel: &str) -> Result<PathBuf, CliError> {
        let path = self.out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(self, stage: &str, seed: u64, settings: serde_json::Value) -> Result<Manifest, CliError> {
        let mut outputs = BTreeMap::new();
        for p in &self.outputs {
            outputs.insert(self.key(p), file_digest(p)?);
        }
        Ok(Manifest { stage: stage.to_string(), version: VERSION.to_string(), seed, settings, inputs: self.inputs, outputs })
    }
}
