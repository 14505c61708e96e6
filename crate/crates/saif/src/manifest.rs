// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pair manifests (JSONL), instruction specs (JSON) and content lists.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use saif_core::pairset::{InstructionSpec, PairManifestEntry};

use crate::error::{Error, Result};
use crate::files;

pub fn write_manifest<W: Write>(entries: &[PairManifestEntry], mut sink: W) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut sink, e)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn manifest_to_bytes(entries: &[PairManifestEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    write_manifest(entries, &mut out).expect("in-memory write");
    out
}

/// Parse a manifest; `origin` names the source in error messages.
pub fn read_manifest<R: Read>(source: R, origin: &Path) -> Result<Vec<PairManifestEntry>> {
    let mut out: Vec<PairManifestEntry> = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: PairManifestEntry =
            serde_json::from_str(&line).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        if out.iter().any(|p| p.pair_id == entry.pair_id) {
            return Err(Error::parse(origin, i + 1, format!("duplicate pair_id {}", entry.pair_id)));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<PairManifestEntry>> {
    files::require_file(path)?;
    read_manifest(std::fs::File::open(path)?, path)
}

pub fn load_instruction_spec(path: &Path) -> Result<InstructionSpec> {
    let spec: InstructionSpec = files::read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

/// One content string per non-blank line.
pub fn load_contents(path: &Path) -> Result<Vec<String>> {
    Ok(files::read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}
