//! Run records and tabular emissions.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub subcommand: String,
    pub config_echo: Value,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub results: Value,
    pub tool_version: String,
}

/// A named table written as `<name>.csv` or `<name>.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    /// Shortest round-trip formatting for floats.
    fn text(&self) -> String {
        match self {
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.to_string(),
            Cell::Num(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = format!("# columns: {}\n", self.columns.join(","));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner().context("flushing csv")?)?);
        fs::write(path, out).with_context(|| format!("writing {}", path.display()))
    }

    fn write_json(&self, path: &Path) -> Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
            .collect();
        fs::write(path, serde_json::to_string_pretty(&rows)?).with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Creates `dir`, or `dir-1`, `dir-2`, ... when it already exists.
pub fn fresh_dir(dir: &Path) -> Result<PathBuf> {
    let mut candidate = dir.to_path_buf();
    let mut k = 0;
    loop {
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                k += 1;
                let mut name = dir.file_name().map(|n| n.to_os_string()).unwrap_or_default();
                name.push(format!("-{k}"));
                candidate = dir.with_file_name(name);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if let Some(parent) = dir.parent() {
                    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
                }
                fs::create_dir(&candidate).with_context(|| format!("creating {}", candidate.display()))?;
                return Ok(candidate);
            }
            Err(e) => return Err(e).with_context(|| format!("creating {}", candidate.display())),
        }
    }
}

pub fn write_outputs(dir: &Path, record: &RunRecord, tables: &[Table], format: Format) -> Result<()> {
    fs::write(dir.join("record.json"), serde_json::to_string_pretty(record)?).context("writing record.json")?;
    for t in tables {
        match format {
            Format::Csv => t.write_csv(&dir.join(format!("{}.csv", t.name)))?,
            Format::Json => t.write_json(&dir.join(format!("{}.json", t.name)))?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_schema_line_and_round_trip_floats() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![0.1f64.into(), Cell::Empty]);
        t.push(vec![(1.0f64 / 3.0).into(), "x".into()]);
        t.write_csv(&dir.path().join("t.csv")).unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# columns: a,b");
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2].split(',').next().unwrap().parse::<f64>().unwrap(), 0.1);
        assert_eq!(lines[3].split(',').next().unwrap().parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn colliding_dirs_get_suffixes() {
        let root = tempfile::tempdir().unwrap();
        let a = fresh_dir(&root.path().join("run")).unwrap();
        let b = fresh_dir(&root.path().join("run")).unwrap();
        assert_ne!(a, b);
        assert!(b.ends_with("run-1"));
    }
}
