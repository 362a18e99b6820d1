//! Run manifests written next to each command's primary output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{read_json, write_json};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub core_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File hash, or the sorted list of contained files for a directory.
fn hash_path(path: &Path) -> Result<Vec<FileHash>> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let mut out = Vec::new();
        for p in entries {
            out.extend(hash_path(&p)?);
        }
        return Ok(out);
    }
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(vec![FileHash {
        path: path.display().to_string(),
        sha256: sha256_bytes(&bytes),
    }])
}

/// `out.ext` → `out.ext.manifest.json`; a directory `dir` → `dir.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let name = primary.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{name}.manifest.json"))
}

pub struct ManifestBuilder<'a> {
    command: &'a str,
    cfg: &'a ExperimentConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> ManifestBuilder<'a> {
    pub fn new(command: &'a str, cfg: &'a ExperimentConfig) -> Self {
        Self {
            command,
            cfg,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, p: impl AsRef<Path>) -> Self {
        self.inputs.push(p.as_ref().to_path_buf());
        self
    }

    pub fn output(mut self, p: impl AsRef<Path>) -> Self {
        self.outputs.push(p.as_ref().to_path_buf());
        self
    }

    pub fn build(&self) -> Result<Manifest> {
        let hash_all = |ps: &[PathBuf]| -> Result<Vec<FileHash>> {
            let mut v = Vec::new();
            for p in ps {
                v.extend(hash_path(p)?);
            }
            Ok(v)
        };
        Ok(Manifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: wind_esn_core::VERSION.to_string(),
            seed: self.cfg.seed,
            config_sha256: sha256_bytes(self.cfg.to_toml().as_bytes()),
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
        })
    }

    /// Write the manifest next to the first output.
    pub fn write(self) -> Result<PathBuf> {
        let m = self.build()?;
        let path = manifest_path(self.outputs.first().expect("manifest needs an output"));
        write_json(&path, &m)?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    read_json(path)
}
