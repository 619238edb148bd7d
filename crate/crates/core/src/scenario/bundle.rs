//! Result tables and their CSV / JSON serialization.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::config::Experiment;
use crate::error::{Error, Result};

/// One table cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    /// What a non-finite number reads back as.
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Num(x) => Some(x),
            Value::Int(i) => Some(i as f64),
            _ => None,
        }
    }

    fn csv_field(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Num(x) => format!("{x:.16e}"),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}
impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}
impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}
impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}
impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_string())
    }
}
impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[j].as_f64()).collect()
    }
}

/// A pass/fail verdict on one quantitative claim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(deserialize_with = "nullable_f64")]
    pub value: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub threshold: f64,
    pub detail: String,
}

/// Reads `null` (how non-finite floats are written) back as NaN.
fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Check {
    /// Passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value < threshold, value, threshold, detail: detail.into() }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value > threshold, value, threshold, detail: detail.into() }
    }
}

/// Everything a run computes; identical inputs give byte-identical payloads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub name: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub tables: BTreeMap<String, Table>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// SHA-256 of the effective configuration.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub payload: Payload,
    pub metadata: Metadata,
}

impl ResultBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.payload.tables.get(name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.payload.checks.iter().find(|c| c.name == name)
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.payload.summary.get(key).and_then(Value::as_f64)
    }

    pub fn all_passed(&self) -> bool {
        self.payload.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Pretty JSON with every float written to 17 significant digits.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17-digit floats; NaN and
/// infinities become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17(PrettyFormatter::with_indent(b"  ")));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::NumericalIntegrity(format!("JSON serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// CSV text of one table: a header row, then one `\n`-terminated line per row.
pub fn table_csv(table: &Table) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fail = |e: csv::Error| Error::NumericalIntegrity(format!("CSV encoding failed: {e}"));
    w.write_record(&table.columns).map_err(fail)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Value::csv_field)).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::NumericalIntegrity(format!("CSV encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields is UTF-8"))
}

fn summary_table(payload: &Payload) -> Table {
    let mut t = Table::new(&["key", "value"]);
    for (k, v) in &payload.summary {
        t.push(vec![k.as_str().into(), v.clone()]);
    }
    t
}

fn checks_table(payload: &Payload) -> Table {
    let mut t = Table::new(&["name", "passed", "value", "threshold", "detail"]);
    for c in &payload.checks {
        t.push(vec![c.name.as_str().into(), c.passed.into(), c.value.into(), c.threshold.into(), c.detail.as_str().into()]);
    }
    t
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes the bundle into directory `dir` (created if needed) and returns
/// the files written. JSON gives `results.json`; CSV gives one file per
/// table plus `summary.csv` and `checks.csv`. Both write `metadata.json`.
pub fn emit(bundle: &ResultBundle, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    match format {
        Format::Json => files.push(write(dir.join("results.json"), &to_json(&bundle.payload)?)?),
        Format::Csv => {
            for (name, table) in &bundle.payload.tables {
                files.push(write(dir.join(format!("{name}.csv")), &table_csv(table)?)?);
            }
            files.push(write(dir.join("summary.csv"), &table_csv(&summary_table(&bundle.payload))?)?);
            files.push(write(dir.join("checks.csv"), &table_csv(&checks_table(&bundle.payload))?)?);
        }
    }
    files.push(write(dir.join("metadata.json"), &to_json(&bundle.metadata)?)?);
    Ok(files)
}
