//! JSONL and JSON file helpers shared by every command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoFailure {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {source}", path.display())]
    Parse {
        path: PathBuf,
        /// 1-based; 0 for whole-file JSON.
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("{}: nothing to write", path.display())]
    Empty { path: PathBuf },
}

fn read_text(path: &Path) -> Result<String, IoFailure> {
    fs::read_to_string(path).map_err(|source| IoFailure::Io { path: path.to_path_buf(), source })
}

/// Reads one value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoFailure> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|source| IoFailure::Parse { path: path.to_path_buf(), line: i + 1, source })
        })
        .collect()
}

/// Serializes one compact JSON object per line, each terminated by `\n`.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String, serde_json::Error> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoFailure> {
    let text = to_jsonl(items).map_err(|source| IoFailure::Parse { path: path.to_path_buf(), line: 0, source })?;
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoFailure> {
    fs::write(path, text).map_err(|source| IoFailure::Io { path: path.to_path_buf(), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoFailure> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| IoFailure::Parse { path: path.to_path_buf(), line: 0, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabreason_core::Instance;

    const LINE: &str = r#"{"id":"a","task":"short_qa","query":"q","table":{"headers":["x"],"rows":[["1"]]},"gold":{"answers":["1"]}}"#;

    #[test]
    fn instances_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.jsonl");
        write_text(&path, &format!("{LINE}\n\n{LINE}\n")).unwrap();
        let items: Vec<Instance> = read_jsonl(&path).unwrap();
        assert_eq!(items.len(), 2);
        let out = dir.path().join("out.jsonl");
        write_jsonl(&out, &items).unwrap();
        let again: Vec<Instance> = read_jsonl(&out).unwrap();
        assert_eq!(items, again);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        write_text(&path, &format!("{LINE}\n{{oops\n")).unwrap();
        match read_jsonl::<Instance>(&path) {
            Err(IoFailure::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_jsonl::<Instance>(&dir.path().join("missing")), Err(IoFailure::Io { .. })));
    }
}
