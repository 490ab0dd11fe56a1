//! Report rows and their CSV / JSON serialization.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Flagged,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Flagged => "flagged",
            Self::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

/// Twelve significant digits, with tags for values that are not finite.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else if x.is_nan() {
        "undefined".to_string()
    } else {
        "divergent".to_string()
    }
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Self::Real(x) => format_real(*x),
            Self::Int(i) => i.to_string(),
            Self::Bool(b) => b.to_string(),
            Self::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Self::Real(x) if x.is_finite() => Value::from(*x),
            Self::Real(x) => Value::from(format_real(*x)),
            Self::Int(i) => Value::from(*i),
            Self::Bool(b) => Value::from(*b),
            Self::Text(s) => Value::from(s.clone()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Self::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Self::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Self::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Self::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Self::Text(x)
    }
}

/// One parameter point of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub parameters: Vec<(String, Cell)>,
    pub metrics: Vec<(String, Cell)>,
    pub status: Status,
}

impl ReportRow {
    pub fn new() -> Self {
        Self { parameters: Vec::new(), metrics: Vec::new(), status: Status::Ok }
    }

    pub fn param(mut self, name: &str, v: impl Into<Cell>) -> Self {
        self.parameters.push((name.to_string(), v.into()));
        self
    }

    pub fn metric(mut self, name: &str, v: impl Into<Cell>) -> Self {
        self.metrics.push((name.to_string(), v.into()));
        self
    }

    pub fn flag_if(mut self, cond: bool) -> Self {
        if cond && self.status == Status::Ok {
            self.status = Status::Flagged;
        }
        self
    }

    pub fn error(mut self, e: impl std::fmt::Display) -> Self {
        self.status = Status::Error;
        self.metrics.push(("message".to_string(), Cell::Text(e.to_string())));
        self
    }
}

impl Default for ReportRow {
    fn default() -> Self {
        Self::new()
    }
}

/// Rows plus aggregate metrics of one command.
#[derive(Debug, Clone, Default)]
pub struct Study {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<(String, Cell)>,
}

impl Study {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn aggregate(&mut self, name: &str, v: impl Into<Cell>) {
        self.aggregates.push((name.to_string(), v.into()));
    }

    /// Column order: names in order of first appearance, then `status`.
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for row in &self.rows {
            for (name, _) in row.parameters.iter().chain(&row.metrics) {
                if !cols.contains(name) {
                    cols.push(name.clone());
                }
            }
        }
        cols.push("status".to_string());
        cols
    }

    pub fn to_csv(&self) -> anyhow::Result<Vec<u8>> {
        let cols = self.columns();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&cols)?;
        for row in &self.rows {
            let record: Vec<String> = cols
                .iter()
                .map(|c| {
                    if c == "status" {
                        return row.status.as_str().to_string();
                    }
                    row.parameters
                        .iter()
                        .chain(&row.metrics)
                        .find(|(n, _)| n == c)
                        .map(|(_, v)| v.render())
                        .unwrap_or_default()
                })
                .collect();
            w.write_record(&record)?;
        }
        Ok(w.into_inner()?)
    }

    pub fn status_counts(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for row in &self.rows {
            n[row.status as usize] += 1;
        }
        n
    }

    pub fn summary(&self, config: &RunConfig) -> Value {
        let mut metrics = Map::new();
        for (name, v) in &self.aggregates {
            metrics.insert(name.clone(), v.to_json());
        }
        let [ok, flagged, error] = self.status_counts();
        let mut root = Map::new();
        root.insert("command".into(), Value::from(config.command().name()));
        root.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        root.insert("config".into(), config.to_json());
        root.insert("rows".into(), Value::from(self.rows.len()));
        root.insert(
            "status".into(),
            serde_json::json!({ "ok": ok, "flagged": flagged, "error": error }),
        );
        root.insert("metrics".into(), Value::Object(metrics));
        Value::Object(root)
    }
}
