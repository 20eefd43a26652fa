//! JSON-lines readers and writers for the transcript, label and manifest files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Parses one record per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(
    reader: impl BufRead,
    name: &str,
) -> Result<Vec<T>, IoError> {
    let mut out = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IoError::Io {
            path: name.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| IoError::Parse {
                path: name.to_string(),
                line: index + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, IoError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| IoError::Io {
        path: name.clone(),
        source,
    })?;
    parse_jsonl(BufReader::new(file), &name)
}

/// Compact JSON, one record per line, each newline-terminated.
pub fn to_jsonl_string<'a, T: Serialize + 'a>(records: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let err = |source| IoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    w.write_all(to_jsonl_string(records).as_bytes())
        .map_err(err)?;
    w.flush().map_err(err)
}
