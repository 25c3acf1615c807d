//! Input digests, output bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub flags: serde_json::Value,
    /// sha256 of every file read, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub version: String,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub duration_seconds: f64,
}

/// Tracks what a subcommand reads and writes.
#[derive(Debug, Default)]
pub struct RunContext {
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
}

impl RunContext {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(bytes)
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    /// Refuses to overwrite any file this run has read.
    pub fn check_output(&self, path: &Path) -> Result<()> {
        let key = path.display().to_string();
        if self.inputs.contains_key(&key) {
            bail!("output {key} is also an input");
        }
        if let Ok(target) = path.canonicalize() {
            for input in self.inputs.keys() {
                if Path::new(input).canonicalize().is_ok_and(|c| c == target) {
                    bail!("output {key} is also an input");
                }
            }
        }
        Ok(())
    }

    pub fn write(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
        self.check_output(path)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }
}

/// `<out>.manifest.json` for file outputs, `<dir>/manifest.json` for
/// directory outputs.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

pub fn write_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
