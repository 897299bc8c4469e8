//! Line-delimited JSON reading and atomic writing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::JsonlError;

fn io_err(path: &Path, source: std::io::Error) -> JsonlError {
    JsonlError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes `items` one per line.
pub fn to_string<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    write_bytes_atomic(path, to_string(items).as_bytes())
}

pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<(), JsonlError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(bytes).map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_lines(BufReader::new(file), &path.display().to_string())
}

/// Parses blank-line tolerant JSONL; errors carry the 1-based line number.
pub fn parse_lines<T: DeserializeOwned, R: BufRead>(
    reader: R,
    label: &str,
) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| JsonlError::Io {
            path: label.to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: label.to_string(),
            line: i + 1,
            source: e,
        })?;
        out.push(item);
    }
    Ok(out)
}
