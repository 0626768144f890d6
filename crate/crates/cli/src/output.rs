//! Tabular results and their CSV / JSON serializations, plus the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Section;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
}

impl Cell {
    /// CSV text: floats with 17 significant digits.
    pub fn text(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Cell::U(n) => Value::from(*n),
            Cell::S(s) => Value::from(s.as_str()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::U(n)
    }
}

impl From<u32> for Cell {
    fn from(n: u32) -> Self {
        Cell::U(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> =
                    self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Everything a command produces: a main table, named side tables, a summary.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub main: Table,
    pub extra: Vec<(&'static str, Table)>,
    pub summary: Value,
    pub cell_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Config(format!("unknown format '{other}' (csv | json)"))),
        }
    }

    pub fn ext(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `dir/name.ext` → `dir/name.<tag>.ext`.
pub fn side_path(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    out.with_file_name(name)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_csv(path: &Path, t: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(&t.columns).map_err(|e| io(path, e))?;
    for r in &t.rows {
        w.write_record(r.iter().map(Cell::text)).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| io(path, e))?;
    w.write_all(b"\n").map_err(|e| io(path, e))?;
    w.flush().map_err(|e| io(path, e))
}

/// Writes the report; returns the data files created.
pub fn write_report(out: &Path, format: Format, r: &Report) -> Result<Vec<PathBuf>, CliError> {
    match format {
        Format::Csv => {
            write_csv(out, &r.main)?;
            let mut files = vec![out.to_path_buf()];
            for (tag, t) in &r.extra {
                let p = side_path(out, tag);
                write_csv(&p, t)?;
                files.push(p);
            }
            Ok(files)
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("rows".into(), r.main.json());
            for (tag, t) in &r.extra {
                obj.insert(tag.to_string(), t.json());
            }
            if !r.summary.is_null() {
                obj.insert("summary".into(), r.summary.clone());
            }
            write_json(out, &Value::Object(obj))?;
            Ok(vec![out.to_path_buf()])
        }
    }
}

/// Provenance record written next to every output.
///
/// `command`, `config`, `seed` and `format` fully determine the data files;
/// `threads`, `wall_clock_seconds` and `outputs` describe this particular run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub command: String,
    pub code_version: String,
    pub config: Section,
    pub seed: u64,
    pub format: Format,
    pub seed_rule: String,
    pub cell_count: u64,
    pub summary: Value,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

pub const SEED_RULE: &str = "cell i draws from mix(seed, i); randomness-free commands ignore the seed";

impl SweepManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let v = serde_json::to_value(self).map_err(|e| io(path, e))?;
        write_json(path, &v)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let f = File::open(path).map_err(|e| io(path, e))?;
        serde_json::from_reader(std::io::BufReader::new(f))
            .map_err(|e| CliError::Config(format!("{}: not a manifest: {e}", path.display())))
    }
}

/// Key → value echo with the CSV float formatting, for summaries.
pub fn summary_object(pairs: &[(&str, Cell)]) -> Value {
    let m: BTreeMap<String, Value> = pairs.iter().map(|(k, v)| (k.to_string(), v.json())).collect();
    serde_json::to_value(m).unwrap_or(Value::Null)
}
