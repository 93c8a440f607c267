use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use palisade_core::config::ConfigFile;
use palisade_core::IterationRecord;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub status: String,
    pub seed: u64,
    pub config: ConfigFile,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub metrics: serde_json::Map<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_s: f64,
    #[serde(skip)]
    started: Option<Instant>,
    #[serde(skip)]
    out: PathBuf,
}

impl Manifest {
    pub fn new(command: &str, config: ConfigFile, seed: u64, out: &Path) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            status: "ok".into(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: None,
            metrics: serde_json::Map::new(),
            history: Vec::new(),
            error: None,
            wall_time_s: 0.0,
            started: Some(Instant::now()),
            out: out.to_path_buf(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = digest_file(path)?;
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    /// Registers a file already written under the output directory.
    pub fn output(&mut self, relative: impl Into<PathBuf>) -> Result<()> {
        let relative = relative.into();
        let sha256 = digest_file(&self.out.join(&relative))?;
        self.outputs.push(FileDigest { path: relative, sha256 });
        Ok(())
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics
            .insert(key.to_string(), serde_json::to_value(value).expect("metric serializes"));
    }

    pub fn write(&mut self) -> Result<()> {
        if let Some(t) = self.started {
            self.wall_time_s = t.elapsed().as_secs_f64();
        }
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
