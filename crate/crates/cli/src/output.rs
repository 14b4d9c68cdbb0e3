//! Tables written as CSV (17 significant digits) or JSON.

use crate::config::Format;
use serde_json::{json, Map, Value};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(*v + 0.0),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

/// Scientific notation with 17 significant digits; `-0` prints as `0`.
pub fn num(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}

/// Optional numeric: a failure becomes an empty cell, never NaN.
pub fn finite(v: f64) -> Cell {
    if v.is_finite() {
        Cell::Num(v)
    } else {
        Cell::Empty
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub command: &'static str,
    pub profile: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra fields for the JSON form.
    pub summary: Map<String, Value>,
}

impl Table {
    pub fn new(command: &'static str, profile: &str, columns: &[&'static str]) -> Self {
        Table {
            command,
            profile: profile.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            summary: Map::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(out, "{}", cells.join(",")).unwrap();
                }
                out
            }
            Format::Json => {
                let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
                let doc = json!({
                    "command": self.command,
                    "profile": self.profile,
                    "columns": self.columns,
                    "rows": rows,
                    "summary": self.summary,
                });
                let mut s = serde_json::to_string_pretty(&doc).unwrap();
                s.push('\n');
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-0.0), "0.0000000000000000e0");
        let v = 1.0 / 3.0;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn csv_quotes_text_and_leaves_failures_empty() {
        let mut t = Table::new("solve", "zero", &["x", "q", "error"]);
        t.push(vec![Cell::Num(1.0), finite(f64::NAN), Cell::Text("bad, \"very\"".into())]);
        let csv = t.render(Format::Csv);
        assert_eq!(csv, "x,q,error\n1.0000000000000000e0,,\"bad, \"\"very\"\"\"\n");
    }

    #[test]
    fn json_mirrors_columns() {
        let mut t = Table::new("solve", "zero", &["x", "q"]);
        t.push(vec![Cell::Num(0.5), Cell::Empty]);
        let v: Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(v["columns"], json!(["x", "q"]));
        assert_eq!(v["rows"][0], json!([0.5, null]));
    }
}
