use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::model::{CaseRecord, SCHEMA_VERSION};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct LineOut<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a T,
}

#[derive(Deserialize)]
struct LineIn<T> {
    schema_version: u32,
    #[serde(flatten)]
    record: T,
}

/// One self-delimiting JSON object per line, each carrying `schema_version`.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(&LineOut {
            schema_version: SCHEMA_VERSION,
            record: item,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LineIn<T> = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if parsed.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("unsupported schema_version {}", parsed.schema_version),
            });
        }
        items.push(parsed.record);
    }
    Ok(items)
}

pub fn save_corpus(path: &Path, corpus: &[CaseRecord]) -> Result<()> {
    write_jsonl(path, corpus)
}

/// Reads and validates a corpus file.
pub fn load_corpus(path: &Path) -> Result<Vec<CaseRecord>> {
    let records: Vec<CaseRecord> = read_jsonl(path)?;
    validate_all(&records)?;
    Ok(records)
}

pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<CaseRecord>> {
    let records: Vec<CaseRecord> = parse_jsonl(reader)?;
    validate_all(&records)?;
    Ok(records)
}

fn validate_all(records: &[CaseRecord]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for r in records {
        r.validate()?;
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Validation {
                id: r.id.clone(),
                message: "duplicate id".into(),
            });
        }
    }
    Ok(())
}
