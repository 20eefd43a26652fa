//! Staged, all-or-nothing output files with metadata sidecars.
//!
//! Every output is written to a hidden temporary file next to its target.
//! `commit` adds a `<output>.meta.json` sidecar for each output (the only
//! place timestamps appear) and renames everything into place. Dropping an
//! uncommitted set removes the temporaries, so a failed command leaves no
//! partial files behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dialclean_core::model::PipelineConfig;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data("io", format!("{}: {e}", path.display()))
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    output.with_file_name(name)
}

fn temp_path(output: &Path) -> PathBuf {
    let mut name = std::ffi::OsString::from(".");
    name.push(output.file_name().unwrap_or_default());
    name.push(format!(".tmp{}", std::process::id()));
    output.with_file_name(name)
}

pub struct Outputs {
    command: &'static str,
    arguments: Value,
    config: PipelineConfig,
    inputs: Vec<PathBuf>,
    started_at: u64,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl Outputs {
    pub fn new(command: &'static str, arguments: &impl Serialize, config: &PipelineConfig) -> Self {
        Self {
            command,
            arguments: serde_json::to_value(arguments).unwrap_or(Value::Null),
            config: config.clone(),
            inputs: Vec::new(),
            started_at: now_ms(),
            staged: Vec::new(),
        }
    }

    /// Records an input file for the sidecar.
    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        if self.staged.iter().any(|(_, p)| p == path) {
            return Err(CliError::usage(format!(
                "{} is given as more than one output",
                path.display()
            )));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let tmp = temp_path(path);
        // Register first so a failed write is still cleaned up.
        self.staged.push((tmp.clone(), path.to_path_buf()));
        fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    fn sidecar(&self, output: &Path, finished_at: u64) -> Vec<u8> {
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|p| json!({ "path": p, "bytes": fs::metadata(p).map(|m| m.len()).ok() }))
            .collect();
        let outputs: Vec<&PathBuf> = self.staged.iter().map(|(_, p)| p).collect();
        let meta = json!({
            "tool": "dialclean",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "output": output,
            "outputs": outputs,
            "inputs": inputs,
            "arguments": self.arguments,
            "config": self.config,
            "started_at_unix_ms": self.started_at,
            "finished_at_unix_ms": finished_at,
        });
        let mut text = serde_json::to_string_pretty(&meta).expect("serializable");
        text.push('\n');
        text.into_bytes()
    }

    /// Writes the sidecars and moves every staged file into place.
    pub fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        let finished = now_ms();
        let targets: Vec<PathBuf> = self.staged.iter().map(|(_, p)| p.clone()).collect();
        for target in &targets {
            let bytes = self.sidecar(target, finished);
            let side = sidecar_path(target);
            let tmp = temp_path(&side);
            self.staged.push((tmp.clone(), side));
            fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        }
        let mut done: Vec<PathBuf> = Vec::new();
        let staged = std::mem::take(&mut self.staged);
        for (i, (tmp, target)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, target) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                for (t, _) in &staged[i..] {
                    let _ = fs::remove_file(t);
                }
                return Err(io_err(target, e));
            }
            done.push(target.clone());
        }
        Ok(targets)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}
