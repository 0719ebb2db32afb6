use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Provenance of one run. Everything except the two timestamps is a
/// function of the inputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: Option<String>,
    pub inputs: Vec<OutputEntry>,
    pub seed: Option<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
pub fn now_unix() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// An output directory that remembers what was written to it.
pub struct OutDir {
    root: PathBuf,
    started: u64,
    manifest: RunManifest,
}

impl OutDir {
    pub fn create(root: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let started = now_unix();
        Ok(Self {
            root: root.to_path_buf(),
            started,
            manifest: RunManifest {
                tool: env!("CARGO_BIN_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config_sha256: None,
                inputs: Vec::new(),
                seed: None,
                started_unix: started,
                finished_unix: started,
                outputs: Vec::new(),
            },
        })
    }

    pub fn set_config(&mut self, canonical_json: &str, seed: Option<u64>) {
        self.manifest.config_sha256 = Some(sha256_hex(canonical_json.as_bytes()));
        self.manifest.seed = seed;
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.manifest.inputs.push(OutputEntry {
            path: path.display().to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(OutputEntry { path: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output serialises");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.started_unix = self.started;
        self.manifest.finished_unix = now_unix().max(self.started);
        let path = self.root.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serialises");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(self.manifest)
    }
}
