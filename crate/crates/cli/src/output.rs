//! CSV and JSON emission: 17-significant-digit decimals, LF line endings,
//! key order fixed by struct declaration.

use std::fs;
use std::io;
use std::path::Path;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory CSV with a header row; every row must match the header width.
pub struct Csv {
    buffer: String,
    columns: usize,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        let mut buffer = columns.join(",");
        buffer.push('\n');
        Self {
            buffer,
            columns: columns.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "ragged CSV row");
        self.buffer.push_str(&fields.join(","));
        self.buffer.push('\n');
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, &self.buffer)
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    text.push('\n');
    fs::write(path, text)
}
