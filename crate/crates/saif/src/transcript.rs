// SPDX-License-Identifier: MIT OR Apache-2.0

//! Offline judge transcripts and generation outputs, both JSONL.
//!
//! Vote transcript lines look like `{"item_id": "q1", "votes": ["A","B","C","C","A"]}`.
//! Grades are case-sensitive. Output files carry `{"item_id": .., "output": ".."}`
//! and may include further fields, which are ignored.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use saif_core::eval::{Ballot, Grade};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::files;

#[derive(Deserialize)]
struct VoteLine {
    item_id: Value,
    votes: Vec<String>,
}

#[derive(Deserialize)]
struct OutputLine {
    item_id: Value,
    output: String,
}

fn id_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn jsonl_lines<R: Read>(source: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    BufReader::new(source)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
}

/// Ballots in file order, with their item ids.
pub fn ingest_external_transcript<R: Read>(source: R, origin: &Path) -> Result<Vec<(String, Ballot)>> {
    let mut out = Vec::new();
    for (line_no, line) in jsonl_lines(source) {
        let line = line?;
        let rec: VoteLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        if rec.votes.len() != 5 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected 5 votes, got {}", rec.votes.len()),
            ));
        }
        let grades = rec
            .votes
            .iter()
            .map(|v| {
                Grade::parse(v).ok_or_else(|| Error::parse(origin, line_no, format!("unknown grade \"{v}\"")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((id_string(&rec.item_id), Ballot::new(&grades)?));
    }
    Ok(out)
}

pub fn load_transcript(path: &Path) -> Result<Vec<(String, Ballot)>> {
    files::require_file(path)?;
    ingest_external_transcript(std::fs::File::open(path)?, path)
}

/// `(item_id, output)` pairs in file order.
pub fn read_outputs<R: Read>(source: R, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (line_no, line) in jsonl_lines(source) {
        let rec: OutputLine =
            serde_json::from_str(&line?).map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        out.push((id_string(&rec.item_id), rec.output));
    }
    Ok(out)
}

pub fn load_outputs(path: &Path) -> Result<Vec<(String, String)>> {
    files::require_file(path)?;
    read_outputs(std::fs::File::open(path)?, path)
}
