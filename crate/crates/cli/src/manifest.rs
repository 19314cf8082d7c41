use std::path::{Path, PathBuf};

use anyhow::Result;
use gcn3d::Error;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(FileDigest {
        path: path.into(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Record of one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool_version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub config: Value,
    pub seeds: Value,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, threads: usize) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            arguments: std::env::args().skip(1).collect(),
            config: Value::Null,
            seeds: Value::Null,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now(),
            finished_at: String::new(),
            status: "running".into(),
            error: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest(path)?);
        Ok(())
    }

    /// Output files are digested when the manifest is written, so files
    /// written after registration are captured in their final state.
    pub fn output(&mut self, path: &Path) {
        self.outputs.push(FileDigest {
            path: path.into(),
            sha256: String::new(),
        });
    }

    pub fn finish(&mut self, outcome: &Result<()>) {
        self.finished_at = now();
        match outcome {
            Ok(()) => self.status = "ok".into(),
            Err(e) => {
                self.status = "failed".into();
                self.error = Some(format!("{e:#}"));
            }
        }
        for o in &mut self.outputs {
            o.sha256 = digest(&o.path).map(|d| d.sha256).unwrap_or_default();
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
