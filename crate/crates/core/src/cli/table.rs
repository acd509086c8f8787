//! CSV tables with `#` provenance lines.

use std::fmt::Write as _;

/// One output table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub provenance: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip representation of a number.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// `1` or `0`.
pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

impl Table {
    pub fn new(name: &str, header: Vec<String>) -> Self {
        Self { name: name.to_string(), provenance: Vec::new(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    /// Column values parsed back as numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx].parse().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for line in &self.provenance {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}
