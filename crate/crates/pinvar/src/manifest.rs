//! Run manifests: the fully resolved inputs of a command, written next to
//! its outputs so the run can be repeated from the manifest alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub inputs: &'a T,
}

/// `results.csv` → `results.csv.manifest.json`; a directory gets
/// `manifest.json` inside it.
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }
}

pub fn write_manifest<T: Serialize>(output: &Path, command: &str, inputs: &T) -> Result<PathBuf> {
    let path = manifest_path(output);
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        inputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
