//! JSONL helpers shared by the commands.

use std::path::Path;

use serde::de::DeserializeOwned;
use timer_core::genpipe::InstructionPair;

use crate::CliError;

/// Reads a JSONL file into typed records, reporting the first bad line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| {
            CliError::runtime(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads a pair JSONL (or benchmark JSONL; the extra `variant` field is
/// ignored) into instruction pairs.
pub fn read_pairs(path: &Path) -> Result<Vec<InstructionPair>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair = InstructionPair::from_jsonl_line(line).map_err(|e| {
            CliError::runtime(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(pair);
    }
    Ok(out)
}

/// One model response keyed by pair id.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ResponseRecord {
    pub pair_id: String,
    pub response: String,
}

/// Joins pairs with their responses by `pair_id`. Returns the joined rows
/// plus the ids that had no response.
pub fn join_responses<'a>(
    pairs: &'a [InstructionPair],
    responses: &'a [ResponseRecord],
) -> (Vec<(&'a InstructionPair, &'a str)>, Vec<String>) {
    let index: std::collections::HashMap<&str, &str> =
        responses.iter().map(|r| (r.pair_id.as_str(), r.response.as_str())).collect();
    let mut joined = Vec::new();
    let mut missing = Vec::new();
    for pair in pairs {
        match index.get(pair.pair_id.as_str()) {
            Some(response) => joined.push((pair, *response)),
            None => missing.push(pair.pair_id.clone()),
        }
    }
    (joined, missing)
}

/// Serializes records to JSONL bytes.
pub fn to_jsonl_bytes<T: serde::Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out.into_bytes()
}
