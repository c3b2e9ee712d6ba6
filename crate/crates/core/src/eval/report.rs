//! Tabular reports written as CSV with a JSON mirror.
//!
//! Column order is fixed by the producer. Columns whose name starts with
//! `wall_` hold wall-clock measurements; every other cell is a pure function
//! of config and seeds.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WALL_PREFIX: &str = "wall_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(v) => Some(v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
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

/// A report table. The config digest is written as the first CSV column and
/// as a top-level JSON field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub config_digest: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Free-form remarks carried into the JSON mirror.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: impl Into<String>, config_digest: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            config_digest: config_digest.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Contract(format!(
                "table `{}`: row has {} cells, expected {}",
                self.name,
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.column(name).and_then(|c| self.rows.get(row).map(|r| &r[c]))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["config_digest".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![self.config_digest.clone()];
            rec.extend(row.iter().map(Cell::render));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    /// CSV text with every `wall_` column removed.
    pub fn deterministic_csv(&self) -> Result<String> {
        let keep: Vec<usize> = (0..self.columns.len()).filter(|&i| !self.columns[i].starts_with(WALL_PREFIX)).collect();
        let mut t = Table::new(self.name.clone(), self.config_digest.clone(), &[]);
        t.columns = keep.iter().map(|&i| self.columns[i].clone()).collect();
        t.rows = self.rows.iter().map(|r| keep.iter().map(|&i| r[i].clone()).collect()).collect();
        t.to_csv()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::File::create(dir.join(format!("{stem}.csv")))?.write_all(self.to_csv()?.as_bytes())?;
        std::fs::File::create(dir.join(format!("{stem}.json")))?.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_wall_filter() {
        let mut t = Table::new("x", "abc", &["schedule", "accel", "wall_time_s"]);
        t.push(vec!["D3, scaled".into(), 0.25.into(), 1.5.into()]).unwrap();
        assert!(t.push(vec!["a".into()]).is_err());
        assert_eq!(t.to_csv().unwrap(), "config_digest,schedule,accel,wall_time_s\nabc,\"D3, scaled\",0.25,1.5\n");
        assert_eq!(t.deterministic_csv().unwrap(), "config_digest,schedule,accel\nabc,\"D3, scaled\",0.25\n");
        let back: Table = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
