//! JSON Lines record schemas and line-oriented IO helpers.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// One input record: an identified description, optionally labeled and dated.
#[derive(Debug, Clone, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub code: Option<String>,
    #[serde(default)]
    pub date: Option<String>,
    /// Carried for provenance; not used by any command.
    #[serde(default)]
    #[allow(dead_code)]
    pub rater: Option<String>,
}

/// One line of a predictions file, as read back by `eval`.
#[derive(Debug, Clone, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(default)]
    pub code: Option<String>,
    #[serde(default)]
    pub rejected: Option<bool>,
}

#[derive(Serialize)]
pub struct CleanOut<'a> {
    pub id: &'a str,
    pub text: &'a str,
    pub rejected: bool,
    pub reason: Option<&'static str>,
}

#[derive(Serialize)]
pub struct TraceOut {
    pub level: &'static str,
    pub value: String,
    pub candidates: usize,
    pub probability: f64,
}

#[derive(Serialize)]
pub struct AlternativeOut {
    pub code: String,
    pub probability: f64,
}

#[derive(Serialize)]
pub struct PredictOut<'a> {
    pub id: &'a str,
    pub code: String,
    pub probability: f64,
    pub trace: Vec<TraceOut>,
    pub fallbacks: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternatives: Option<Vec<AlternativeOut>>,
}

#[derive(Serialize)]
pub struct RejectedOut<'a> {
    pub id: &'a str,
    pub rejected: bool,
    pub reason: &'static str,
}

#[derive(Serialize)]
pub struct ErrorOut<'a> {
    pub id: &'a str,
    pub error: String,
}

/// Opens `path`, treating `-` as standard input.
pub fn open_input(path: &str) -> Result<Box<dyn Read>, CliError> {
    if path == "-" {
        return Ok(Box::new(std::io::stdin()));
    }
    let file = File::open(path).map_err(|e| CliError::Data(format!("cannot open {path}: {e}")))?;
    Ok(Box::new(file))
}

/// Reads JSONL records, skipping blank lines; parse failures carry the line
/// number.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(
    reader: impl Read,
    source: &str,
) -> Result<Vec<T>, CliError> {
    let mut out = Vec::new();
    for (index, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{source} line {}: {e}", index + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Loads dataset records from a path and enforces unique ids.
pub fn read_dataset(path: &str) -> Result<Vec<DatasetRecord>, CliError> {
    let records: Vec<DatasetRecord> = read_jsonl(open_input(path)?, path)?;
    let mut seen = HashSet::new();
    for record in &records {
        if !seen.insert(record.id.as_str()) {
            return Err(CliError::Data(format!(
                "{path}: duplicate record id {:?}",
                record.id
            )));
        }
    }
    Ok(records)
}

pub fn open_taxonomy(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}
