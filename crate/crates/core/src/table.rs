//! Rectangular result tables with a provenance header.
//!
//! CSV output is comma separated with LF line endings; provenance lines come
//! first as `# key: value` comments. Reals use Rust's shortest round-trip
//! formatting (exponent form outside `[1e-4, 1e15)`), so identical results
//! give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Real(f64),
    Int(i64),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Real(v) if *v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) => format!("{v:e}"),
            Cell::Real(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => json!(s),
            Cell::Real(v) if v.is_finite() => json!(v),
            Cell::Real(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Cell::Real(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
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

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    provenance: Vec<(String, String)>,
}

impl SweepTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        SweepTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            provenance: vec![("version".into(), env!("CARGO_PKG_VERSION").into())],
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::param(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Adds or replaces a provenance entry.
    pub fn set_provenance(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.provenance.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.provenance.push((key.to_string(), value)),
        }
    }

    pub fn provenance(&self) -> &[(String, String)] {
        &self.provenance
    }

    /// Records the SHA-256 of the canonical JSON form of `config`.
    pub fn set_config(&mut self, config: &Value) {
        self.set_provenance("config_sha256", config_hash(config));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self, config: Option<&Value>) -> Value {
        let provenance: Map<String, Value> = self.provenance.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        json!({
            "columns": self.columns,
            "rows": rows,
            "provenance": provenance,
            "config": config.cloned().unwrap_or(Value::Null),
        })
    }

    /// Writes `path` (CSV) and `path.json` (sidecar with the config echo).
    pub fn write(&self, path: &Path, config: Option<&Value>) -> Result<PathBuf> {
        std::fs::write(path, self.to_csv())?;
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".json");
        let sidecar = PathBuf::from(sidecar);
        std::fs::write(&sidecar, serde_json::to_string_pretty(&self.to_json(config))? + "\n")?;
        Ok(sidecar)
    }
}

/// Hex SHA-256 of the compact JSON serialization (object keys sorted).
pub fn config_hash(config: &Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = SweepTable::new(["s", "name", "ok"]);
        t.push(vec![0.5.into(), "a,b".into(), true.into()]).unwrap();
        t.push(vec![Cell::Real(1e-20), "plain".into(), false.into()]).unwrap();
        assert!(t.push(vec![0.1.into()]).is_err());
        t.set_config(&json!({"b": 1, "a": 2}));
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# version: "));
        assert!(lines[1].starts_with("# config_sha256: "));
        assert_eq!(lines[2], "s,name,ok");
        assert_eq!(lines[3], "0.5,\"a,b\",true");
        assert_eq!(lines[4], "1e-20,plain,false");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn hash_ignores_key_order() {
        assert_eq!(config_hash(&json!({"x": 1, "y": [1, 2]})), config_hash(&json!({"y": [1, 2], "x": 1})));
        assert_ne!(config_hash(&json!({"x": 1})), config_hash(&json!({"x": 2})));
    }
}
