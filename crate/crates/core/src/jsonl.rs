//! JSON-Lines reading and writing.
//!
//! Files written by this crate start with a header line
//! `{"schema_version":1,"kind":"..."}`. Readers accept files with or
//! without the header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub kind: String,
}

/// A line that failed to parse in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Malformed {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub header: Option<Header>,
    pub malformed: Vec<Malformed>,
}

fn parse_header(line: &str) -> Option<Header> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    if obj.len() == 2 && obj.contains_key("schema_version") && obj.contains_key("kind") {
        serde_json::from_value(value).ok()
    } else {
        None
    }
}

/// Parses JSON-Lines from `reader`. Blank lines are ignored. In strict mode
/// the first malformed line is an error; otherwise it is recorded and skipped.
pub fn parse<T: DeserializeOwned>(
    reader: impl BufRead,
    path: &Path,
    strict: bool,
) -> Result<Loaded<T>> {
    let mut loaded = Loaded {
        records: Vec::new(),
        header: None,
        malformed: Vec::new(),
    };
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if line_no == 1 {
            if let Some(h) = parse_header(&line) {
                loaded.header = Some(h);
                continue;
            }
        }
        match serde_json::from_str::<T>(&line) {
            Ok(record) => loaded.records.push(record),
            Err(e) if strict => {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
            Err(e) => {
                log::warn!("{}:{line_no}: skipping malformed record: {e}", path.display());
                loaded.malformed.push(Malformed {
                    line: line_no,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(loaded)
}

pub fn read<T: DeserializeOwned>(path: impl AsRef<Path>, strict: bool) -> Result<Loaded<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse(BufReader::new(file), path, strict)
}

/// Writes a header line followed by one record per line.
pub fn write<T: Serialize>(path: impl AsRef<Path>, kind: &str, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut sink = Writer::create(path, kind)?;
    for r in records {
        sink.push(r)?;
    }
    sink.finish()
}

/// Incremental JSON-Lines writer.
pub struct Writer {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Writer {
    pub fn create(path: impl AsRef<Path>, kind: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Writer {
            path,
            out: BufWriter::new(file),
        };
        w.push(&Header {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
        })?;
        Ok(w)
    }

    pub fn push<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        id: u32,
    }

    #[test]
    fn header_is_skipped_and_malformed_lines_reported() {
        let input = "{\"schema_version\":1,\"kind\":\"rows\"}\n{\"id\":1}\n\nnot json\n{\"id\":2}\n";
        let loaded: Loaded<Row> = parse(input.as_bytes(), Path::new("mem"), false).unwrap();
        assert_eq!(loaded.records, vec![Row { id: 1 }, Row { id: 2 }]);
        assert_eq!(loaded.header.unwrap().kind, "rows");
        assert_eq!(loaded.malformed.len(), 1);
        assert_eq!(loaded.malformed[0].line, 4);
    }

    #[test]
    fn strict_mode_fails_with_line_number() {
        let input = "{\"id\":1}\n{\"id\":\"x\"}\n";
        let err = parse::<Row>(input.as_bytes(), Path::new("mem"), true).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }
}
