//! Run manifests: a config snapshot, input digests, timestamps, and output
//! paths, so every artifact is traceable to exactly one run.
//!
//! Manifests carry all the time-dependent bookkeeping (wall clock, latency,
//! cache hits); the other artifacts stay byte-deterministic.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::DecodingParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputStats {
    pub variables: usize,
    pub requests: usize,
    pub cache_hits: usize,
    pub total_seconds: f64,
    pub seconds_per_variable: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    pub params: Option<DecodingParams>,
    pub shots: Option<u8>,
    pub subsets: Vec<String>,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub throughput: Option<ThroughputStats>,
}

impl RunManifest {
    pub fn begin(command: &str, seed: u64) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            endpoint: None,
            model_id: None,
            params: None,
            shots: None,
            subsets: Vec::new(),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms: now_unix_ms(),
            finished_unix_ms: 0,
            throughput: None,
        }
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> std::io::Result<()> {
        self.inputs.push(InputDigest {
            path: path.as_ref().display().to_string(),
            sha256: sha256_file(path.as_ref())?,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: impl AsRef<Path>) {
        self.outputs.push(path.as_ref().display().to_string());
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = now_unix_ms();
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let payload = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path.as_ref(), payload)
    }

    pub fn load_json(path: impl AsRef<Path>) -> std::io::Result<RunManifest> {
        let contents = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&contents).map_err(|err| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("manifest: {err}"))
        })
    }
}

pub fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn sha256_file(path: impl AsRef<Path>) -> std::io::Result<String> {
    let bytes = std::fs::read(path.as_ref())?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
