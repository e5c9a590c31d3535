use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skewmsv::ReturnsPanel;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Provenance of one output directory. Written last, so its presence marks
/// a complete artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub created: String,
    pub seed: u64,
    pub threads: usize,
    pub elapsed_secs: f64,
    /// SHA-256 of the canonical config TOML below.
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub archive: Option<ArchiveInfo>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    pub path: String,
    pub sha256: String,
    pub t: usize,
    pub k: usize,
    /// Series in model order, after any reordering.
    pub names: Vec<String>,
    pub dates: Vec<String>,
    /// `order[r]` is the column of the input file placed at rank `r`.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub variant: String,
    pub k: usize,
    pub stored_draws: usize,
    pub h_paths: usize,
    pub a_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveInfo {
    pub models: Vec<String>,
    pub baseline: String,
    pub initial: usize,
    pub step: usize,
    pub refits: usize,
    pub d_max: usize,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, elapsed_secs: f64) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: config.seed,
            threads: rayon::current_num_threads(),
            elapsed_secs,
            config_hash: config.hash(),
            data: None,
            fit: None,
            archive: None,
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join("manifest.toml");
        let text = toml::to_string(self).map_err(|e| CliError::artifact(&path, e))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join("manifest.toml");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| CliError::artifact(&path, e))?;
        if m.config.hash() != m.config_hash {
            return Err(CliError::artifact(&path, "config hash does not match the recorded config"));
        }
        Ok(m)
    }
}

impl DataInfo {
    pub fn new(path: &Path, panel: &ReturnsPanel, order: Vec<usize>) -> CliResult<Self> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
            t: panel.t(),
            k: panel.k(),
            names: panel.names().to_vec(),
            dates: panel.dates().to_vec(),
            order,
        })
    }
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
