//! JSONL files with an optional leading header line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub config_hash: String,
    pub stopword_version: String,
    pub format: u32,
}

impl Header {
    pub fn new(kind: &str, cfg: &PipelineConfig) -> Self {
        Self {
            kind: kind.to_string(),
            config_hash: cfg.hash(),
            stopword_version: cfg.stopword_version.clone(),
            format: FORMAT_VERSION,
        }
    }

    /// Errors when `self` was produced under a different config, unless `force`.
    pub fn check(&self, cfg: &PipelineConfig, source: &Path, force: bool) -> Result<()> {
        let expected = cfg.hash();
        if self.config_hash != expected {
            if force {
                log::warn!(
                    "{}: config hash {} differs from {expected}; continuing (--force)",
                    source.display(),
                    self.config_hash
                );
            } else {
                bail!(
                    "{} was written with config {} but the current config is {expected}; pass --force to mix them",
                    source.display(),
                    self.config_hash
                );
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    #[serde(rename = "_header")]
    header: Header,
}

fn parse_header(line: &str) -> Option<Header> {
    if !line.trim_start().starts_with("{\"_header\"") {
        return None;
    }
    serde_json::from_str::<HeaderLine>(line).ok().map(|h| h.header)
}

pub struct Document<T> {
    pub header: Option<Header>,
    pub rows: Vec<T>,
}

/// Reads every row, reporting `path:line` on malformed input.
pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Document<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_from(BufReader::new(f), path)
}

pub fn read_from<T: DeserializeOwned>(reader: impl BufRead, path: &Path) -> Result<Document<T>> {
    let mut header = None;
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.with_context(|| format!("{}:{}: read failed", path.display(), n + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        if n == 0 {
            if let Some(h) = parse_header(&line) {
                header = Some(h);
                continue;
            }
        }
        let row = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: schema error", path.display(), n + 1))?;
        rows.push(row);
    }
    Ok(Document { header, rows })
}

/// Reads rows and enforces the config hash when a header is present.
pub fn read_checked<T: DeserializeOwned>(
    path: &Path,
    cfg: &PipelineConfig,
    force: bool,
) -> Result<Vec<T>> {
    let doc = read(path)?;
    if let Some(h) = &doc.header {
        h.check(cfg, path, force)?;
    }
    Ok(doc.rows)
}

pub fn write<T: Serialize>(path: &Path, header: &Header, rows: &[T]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer(&mut w, &HeaderLine { header: header.clone() })?;
    w.write_all(b"\n")?;
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON object with the header under `_header`.
pub fn write_report<T: Serialize>(path: &Path, header: &Header, body: &T) -> Result<()> {
    let mut value = serde_json::to_value(body)?;
    match value.as_object_mut() {
        Some(obj) => {
            obj.insert("_header".into(), serde_json::to_value(header)?);
        }
        None => bail!("report body must be a JSON object"),
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_report_header(path: &Path) -> Result<Option<Header>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(match value.get("_header") {
        Some(h) => Some(serde_json::from_value(h.clone())?),
        None => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        id: String,
    }

    #[test]
    fn header_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let cfg = PipelineConfig::default();
        let rows = vec![Row { id: "a".into() }, Row { id: "b".into() }];
        write(&path, &Header::new("test", &cfg), &rows).unwrap();
        let doc: Document<Row> = read(&path).unwrap();
        assert_eq!(doc.rows, rows);
        assert_eq!(doc.header.unwrap().config_hash, cfg.hash());
    }

    #[test]
    fn mismatched_hash_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let other = PipelineConfig { seed: 1, ..Default::default() };
        write(&path, &Header::new("test", &other), &[Row { id: "a".into() }]).unwrap();
        let cfg = PipelineConfig::default();
        assert!(read_checked::<Row>(&path, &cfg, false).is_err());
        assert_eq!(read_checked::<Row>(&path, &cfg, true).unwrap().len(), 1);
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let input = "{\"id\": \"a\"}\n{\"id\": 3}\n";
        let err = read_from::<Row>(input.as_bytes(), Path::new("x.jsonl"))
            .err()
            .unwrap();
        assert!(format!("{err:#}").contains("x.jsonl:2"));
    }

    #[test]
    fn headerless_files_are_accepted() {
        let doc: Document<Row> = read_from("{\"id\":\"z\"}\n".as_bytes(), Path::new("x")).unwrap();
        assert!(doc.header.is_none());
        assert_eq!(doc.rows.len(), 1);
    }
}
