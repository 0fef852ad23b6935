//! Run manifests written next to every command output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TOOL_VERSION: &str = concat!("isingnn ", env!("CARGO_PKG_VERSION"));

/// Record of one command invocation. `args` is the fully resolved argument
/// list (configuration file already merged) and is what `replay` re-runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub working_dir: String,
    pub tool_version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start<C: Serialize>(command: &str, args: &[String], config: &C) -> Self {
        Self {
            command: command.to_string(),
            args: args.to_vec(),
            config: serde_json::to_value(config).expect("configuration serializes"),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            working_dir: std::env::current_dir()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            tool_version: TOOL_VERSION.to_string(),
            started_unix_s: now(),
            finished_unix_s: 0.0,
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }

    /// Stamps the finish time and writes the manifest to `path`.
    pub fn finish(&mut self, path: &Path) -> Result<(), CliError> {
        self.finished_unix_s = now();
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

/// Sidecar path `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
