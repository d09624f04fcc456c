//! Table output in CSV or JSON, plus an optional gnuplot companion script.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use clap::ValueEnum;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    /// Format implied by a file extension, if any.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl Cell {
    fn csv(self) -> String {
        match self {
            Cell::Float(v) => format_float(v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
        }
    }

    fn json(self) -> Value {
        match self {
            // non-finite floats have no JSON literal
            Cell::Float(v) => serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
        }
    }
}

/// Ten significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.csv()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(k, c)| (k.to_string(), c.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Writes `table` to `path`. CSV carries only the table; JSON wraps it as
/// `{"config": .., "rows": [..], "summary": ..}`.
pub fn write_table(table: &Table, format: Format, path: &Path, config: Value, summary: Value) -> io::Result<()> {
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let doc = json!({ "config": config, "rows": table.to_json_rows(), "summary": summary });
            let mut s = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
            s.push('\n');
            s
        }
    };
    fs::write(path, text)
}

/// A gnuplot script plotting every column of a CSV file against the first.
pub fn gnuplot_script(table: &Table, data: &Path, log_y: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel '{}'", table.columns[0]);
    if log_y {
        let _ = writeln!(s, "set logscale y");
    }
    let series: Vec<String> = (2..=table.columns.len())
        .map(|i| format!("'{}' using 1:{i} with lines", data.display()))
        .collect();
    let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shapes() {
        let mut t = Table::new(vec!["distance_km", "r_final"]);
        assert_eq!(t.to_csv(), "distance_km,r_final\n");
        t.push(vec![0.0.into(), 1.5e-3.into()]);
        t.push(vec![10.0.into(), (-2.0).into()]);
        assert_eq!(
            t.to_csv(),
            "distance_km,r_final\n0.000000000e0,1.500000000e-3\n1.000000000e1,-2.000000000e0\n"
        );
    }

    #[test]
    fn ten_significant_digits() {
        assert_eq!(format_float(0.1100278476), "1.100278476e-1");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn json_rows_handle_non_finite() {
        let mut t = Table::new(vec!["x", "n", "ok"]);
        t.push(vec![f64::INFINITY.into(), 3u64.into(), true.into()]);
        assert_eq!(t.to_json_rows(), json!([{ "x": null, "n": 3, "ok": true }]));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(Format::from_path(Path::new("a/b.JSON")), Some(Format::Json));
        assert_eq!(Format::from_path(Path::new("b.csv")), Some(Format::Csv));
        assert_eq!(Format::from_path(Path::new("b.txt")), None);
    }
}
