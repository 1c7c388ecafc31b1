//! Run manifests. Each run writes one next to its outputs; replaying it
//! recomputes the outputs and compares digests.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// One file a command produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
    /// False for files holding wall-clock measurements.
    pub reproducible: bool,
}

impl OutputFile {
    pub fn new(name: &str, bytes: impl Into<Vec<u8>>) -> Self {
        OutputFile {
            name: name.into(),
            bytes: bytes.into(),
            reproducible: true,
        }
    }

    pub fn timing(name: &str, bytes: impl Into<Vec<u8>>) -> Self {
        OutputFile {
            reproducible: false,
            ..Self::new(name, bytes)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
    pub reproducible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Effective configuration after defaults, file and flags.
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<OutputRecord>,
    pub exit_code: i32,
    /// Wall-clock fields, excluded from reproducibility checks.
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }

    /// The manifest with wall-clock fields zeroed.
    pub fn without_clock(&self) -> Self {
        RunManifest {
            started_unix_ms: 0,
            finished_unix_ms: 0,
            ..self.clone()
        }
    }
}

/// Writes every output and the manifest into `dir`. Returns the manifest path.
pub fn write_run(dir: &Path, manifest: &mut RunManifest, files: &[OutputFile]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    manifest.outputs = files
        .iter()
        .map(|f| OutputRecord {
            path: f.name.clone(),
            sha256: sha256_hex(&f.bytes),
            bytes: f.bytes.len(),
            reproducible: f.reproducible,
        })
        .collect();
    for f in files {
        let p = dir.join(&f.name);
        std::fs::write(&p, &f.bytes).map_err(CliError::io(&p))?;
    }
    let path = dir.join(RunManifest::file_name(&manifest.command));
    std::fs::write(&path, manifest.to_json()).map_err(CliError::io(&path))?;
    Ok(path)
}
