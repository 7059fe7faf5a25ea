//! Diagnostics CSV and JSON reports.
//!
//! A CSV file starts with one `#` line naming the scenario and the write
//! time, then the column row, then one row per record. Reals are written in
//! the shortest form that parses back to the same `f64`. Everything after
//! the first line depends only on the configuration and seed.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

/// A cell in a CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Flag(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

/// Shortest round-trip decimal; `NaN`, `inf`, `-inf` for the non-finite.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Real(v) => f.write_str(&format_real(*v)),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Flag(b) => f.write_str(if *b { "1" } else { "0" }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    /// # Panics
    ///
    /// If the row width differs from the column count.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// Column row and records, without the header line.
    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn render(&self, scenario: &str) -> String {
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!(
            "# ekp {scenario} version={} unix_time={unix}\n{}",
            env!("CARGO_PKG_VERSION"),
            self.body()
        )
    }

    pub fn write(&self, scenario: &str, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render(scenario))
    }
}

/// Strips the `#` header line.
pub fn csv_body(text: &str) -> &str {
    match text.strip_prefix('#') {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_in_shortest_form() {
        for v in [0.1, 1.0, -2.5e-17, 1e300, 123456.789, f64::MIN_POSITIVE, 1.0 / 3.0] {
            let s = format_real(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(f64::NAN), "NaN");
        assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn body_excludes_the_timestamp_line() {
        let mut t = Table::new(&["t", "E_rel", "contained"]);
        t.push(vec![0.0.into(), 1.5e-3.into(), true.into()]);
        t.push(vec![0.5.into(), 2.0.into(), false.into()]);
        let text = t.render("weak-strong");
        assert!(text.starts_with("# ekp weak-strong version="));
        assert!(text.lines().next().unwrap().contains("unix_time="));
        assert_eq!(csv_body(&text), "t,E_rel,contained\n0.0,0.0015,1\n0.5,2.0,0\n");
        assert_eq!(csv_body(&t.body()), t.body());
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_panic() {
        Table::new(&["a", "b"]).push(vec![1.0.into()]);
    }
}
