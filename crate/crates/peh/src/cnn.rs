//! Hand-off to the external CNN trainer.
//!
//! Contract: the program is run as
//! `<program> train --manifest <dir>/manifest.jsonl --out <dir>/result`.
//! The manifest lists one image tensor per event with its class. On success
//! the program exits with status 0 and leaves `<out>/metrics.json` in the
//! same schema as the baseline classifier's metrics. Any other exit status,
//! or a missing or malformed metrics file, is an error.

use std::path::{Path, PathBuf};
use std::process::Command;

use peh_core::classify::Metrics;

use crate::error::{Error, Result};
use crate::io::read_json;

/// Overrides the trainer program name.
pub const CNN_BIN_ENV: &str = "PEH_CNN_BIN";
pub const DEFAULT_CNN_BIN: &str = "peh-cnn";
pub const METRICS_NAME: &str = "metrics.json";

pub fn cnn_program() -> String {
    std::env::var(CNN_BIN_ENV).unwrap_or_else(|_| DEFAULT_CNN_BIN.to_string())
}

/// Run the trainer on `manifest` and read back its metrics.
pub fn run_external_cnn(program: &str, manifest: &Path, out_dir: &Path) -> Result<Metrics> {
    let fail = |message: String| Error::External { program: program.to_string(), message };
    let output = Command::new(program)
        .arg("train")
        .arg("--manifest")
        .arg(manifest)
        .arg("--out")
        .arg(out_dir)
        .output()
        .map_err(|e| fail(format!("could not start: {e}")))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
        return Err(fail(format!(
            "exit status {}: {}",
            output.status,
            tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
        )));
    }
    let metrics_path: PathBuf = out_dir.join(METRICS_NAME);
    if !metrics_path.exists() {
        return Err(fail(format!("no {} written", metrics_path.display())));
    }
    read_json(&metrics_path)
}
