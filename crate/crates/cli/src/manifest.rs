use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance written next to every output as `<output>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub arguments: Vec<String>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    /// Command-specific diagnostics.
    pub details: serde_json::Value,
    pub seed: Option<u64>,
    pub elapsed_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION"),
            arguments: std::env::args().collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
            details: serde_json::Value::Null,
            seed: None,
            elapsed_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputRecord {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn config<T: Serialize>(&mut self, value: &T) {
        self.config = serde_json::to_value(value).expect("config serializes");
    }

    pub fn details<T: Serialize>(&mut self, value: &T) {
        self.details = serde_json::to_value(value).expect("details serialize");
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Write the manifest beside `primary`.
    pub fn finish(mut self, primary: &Path) -> anyhow::Result<()> {
        if let Some(t) = self.started {
            self.elapsed_seconds = t.elapsed().as_secs_f64();
        }
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text).map_err(|e| hoaseg::Error::io(&path, e))?;
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}
