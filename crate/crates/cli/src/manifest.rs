//! Run manifests: every command writes one next to its outputs, recording
//! the exact argv, resolved configuration, seed and code version. `pfc
//! replay <manifest>` re-executes the recorded argv; outputs are
//! bit-identical for a given platform and seed.

use serde_json::{json, Value};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    config: Value,
    seed: Option<u64>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &str, argv: &[String]) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            argv: argv.to_vec(),
            config: Value::Null,
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn config(mut self, config: Value) -> Self {
        self.config = config;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn output(mut self, path: &str) -> Self {
        self.outputs.push(path.to_string());
        self
    }

    pub fn write(self, path: &str) -> Result<(), CliError> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = json!({
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp_unix": timestamp,
            "outputs": self.outputs,
        });
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::input(format!("manifest serialization: {e}")))?;
        std::fs::write(path, text)
            .map_err(|e| CliError::input(format!("cannot write manifest {path}: {e}")))
    }
}

/// Recorded argv of a written manifest, for replay.
pub fn read_argv(path: &str) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read manifest {path}: {e}")))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{path}: not a manifest: {e}")))?;
    let argv = doc["argv"]
        .as_array()
        .ok_or_else(|| CliError::input(format!("{path}: manifest has no argv array")))?;
    argv.iter()
        .map(|v| {
            v.as_str()
                .map(|s| s.to_string())
                .ok_or_else(|| CliError::input(format!("{path}: non-string argv entry")))
        })
        .collect()
}
