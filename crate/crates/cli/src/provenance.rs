//! Every command writes `PROVENANCE.json` next to its outputs: the command,
//! the config hash, and the SHA-256 of every input and output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use rulelab::fsutil::{sha256_hex, write_atomic};

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub command: String,
    pub tool_version: &'static str,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Provenance {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(cfg.source_text.as_bytes()),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn input_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
    }

    /// Writes `bytes` atomically and records its hash under a path relative to `root`.
    pub fn write(&mut self, root: &Path, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<PathBuf> {
        let path = root.join(rel.as_ref());
        write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(rel.as_ref().display().to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Records an output that already exists on disk (e.g. from a resumed run).
    pub fn existing(&mut self, root: &Path, rel: impl AsRef<Path>) -> Result<()> {
        let path = root.join(rel.as_ref());
        let bytes = std::fs::read(&path).with_context(|| format!("hashing {}", path.display()))?;
        self.outputs.insert(rel.as_ref().display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(self, root: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self)? + "\n";
        write_atomic(&root.join("PROVENANCE.json"), text.as_bytes()).context("writing provenance")
    }
}
