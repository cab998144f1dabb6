//! CSV and JSON-lines emission with a leading metadata line.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v as i64)
    }
}
impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}
impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}
impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}
impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}
impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}
impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Text(String::new()), Into::into)
    }
}

/// Seventeen significant digits, `.` as decimal separator.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Field {
    pub fn to_csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => format_float(*v),
            Field::Bool(v) => v.to_string(),
            Field::Text(s) => s.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Field::Int(v) => Value::from(*v),
            Field::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Field::Bool(v) => Value::Bool(*v),
            Field::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A rectangular result with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sheet {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Field>>,
}

impl Sheet {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Renders the sheet after the metadata line.
    pub fn render(&self, meta: &Value, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                let _ = writeln!(out, "# {}", meta);
                let mut w = csv::Writer::from_writer(Vec::new());
                let _ = w.write_record(&self.columns);
                for row in &self.rows {
                    let _ = w.write_record(row.iter().map(Field::to_csv));
                }
                let body = w.into_inner().unwrap_or_default();
                out.push_str(&String::from_utf8_lossy(&body));
            }
            Format::Json => {
                let mut head = Map::new();
                head.insert("meta".into(), meta.clone());
                let _ = writeln!(out, "{}", Value::Object(head));
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, f)| (c.to_string(), f.to_json()))
                        .collect();
                    let _ = writeln!(out, "{}", Value::Object(obj));
                }
            }
        }
        out
    }
}

/// Everything after the metadata line.
pub fn body(text: &str) -> &str {
    text.split_once('\n').map_or("", |(_, rest)| rest)
}

/// Writes through a sibling temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
