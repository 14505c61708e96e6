// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-writer run directories.
//!
//! Artifacts are never overwritten. Each file is written to a temporary name
//! and renamed into place; if the run fails before [`RunDir::finish`], every
//! artifact it wrote is removed again.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::artifacts::{to_json_bytes, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::files::{sha256_file, sha256_hex};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// `run_manifest.<command>.json`. `timestamp` is the only field that changes
/// between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub parameters: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timestamp: String,
}

pub struct RunDir {
    root: PathBuf,
    written: Vec<PathBuf>,
    outputs: Vec<FileDigest>,
    finished: bool,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            outputs: Vec::new(),
            finished: false,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write `name` (may contain `/`) under the run directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        if path.exists() {
            return Err(Error::AlreadyExists(path));
        }
        let parent = path.parent().unwrap_or(&self.root).to_path_buf();
        fs::create_dir_all(&parent)?;
        let file_name = path.file_name().expect("artifact names are file names").to_string_lossy();
        let tmp = parent.join(format!(".{file_name}.partial"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.written.push(path.clone());
        self.outputs.push(FileDigest {
            path: name.to_owned(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let bytes = to_json_bytes(value)?;
        self.write(name, &bytes)
    }

    /// Record the run manifest and keep the artifacts.
    pub fn finish(mut self, command: &str, parameters: Value, inputs: &[&Path]) -> Result<PathBuf> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            parameters,
            inputs,
            outputs: self.outputs.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let path = self.write_json(&format!("run_manifest.{command}.json"), &manifest)?;
        self.finished = true;
        Ok(path)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.finished {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}
