//! Columnar numeric records, written as UTF-8 text.
//!
//! Layout: one `#`-prefixed provenance line, one header row of
//! `name[unit]` cells, then comma-separated rows. Floats use Rust's shortest
//! round-trip formatting so regenerated files are byte-identical.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub provenance: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(provenance: impl Into<String>, columns: &[(&str, &str)]) -> Self {
        Self {
            provenance: provenance.into(),
            columns: columns.iter().map(|(n, u)| Column { name: n.to_string(), unit: u.to_string() }).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.provenance);
        let header: Vec<String> = self.columns.iter().map(|c| format!("{}[{}]", c.name, c.unit)).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("preset=demo", &[("time_ns", "ns"), ("P0", "1")]);
        t.push(vec![0.0, 1.0]);
        t.push(vec![0.5, 0.25]);
        assert_eq!(t.to_csv(), "# preset=demo\ntime_ns[ns],P0[1]\n0.0,1.0\n0.5,0.25\n");
        assert_eq!(t.column("P0").unwrap(), vec![1.0, 0.25]);
        assert!(t.column("missing").is_none());
    }
}
