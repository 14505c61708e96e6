// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small filesystem helpers that map failures onto [`Error`] categories.

use std::fs;
use std::path::{Path, PathBuf};

use saif_core::tensor::TensorBundle;
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::bundle;
use crate::error::{Error, Result};

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    require_file(path)?;
    Ok(fs::read_to_string(path)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

pub fn load_bundle(path: &Path) -> Result<TensorBundle> {
    require_file(path)?;
    bundle::load_bundle(path).map_err(|source| Error::Bundle {
        path: path.to_path_buf(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// `path` with its file name replaced by `name`.
pub fn sibling(path: &Path, name: &str) -> PathBuf {
    path.with_file_name(name)
}
