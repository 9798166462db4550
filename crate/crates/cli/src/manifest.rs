use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::data::{output_files, read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    /// The command exactly as it was resolved from the arguments.
    pub command: Command,
    /// Configs after defaults, config files and overrides were applied.
    pub resolved: serde_json::Value,
    /// Output files in the run directory, sorted.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &Command, resolved: serde_json::Value, out: &Path) -> Result<Self> {
        let outputs = output_files(out)?
            .iter()
            .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_string))
            .collect();
        Ok(Self {
            tool: "pssr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: command.seed(),
            command: command.clone(),
            resolved,
            outputs,
        })
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        write_json(&out.join(MANIFEST_FILE), self)
    }

    /// Accepts the manifest file itself or the run directory holding it.
    pub fn read(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        read_json(&file).with_context(|| format!("cannot load manifest {}", file.display()))
    }
}
