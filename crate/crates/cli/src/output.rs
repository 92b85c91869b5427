//! CSV and field-file writers. Floats use six significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use timoshenko_core::{Mesh1D, P0Field, P1Field};

pub fn num(x: f64) -> String {
    format!("{x:.5e}")
}

/// A CSV table preceded by `# key=value` lines.
pub struct Table {
    header: Vec<(String, String)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<(String, String)>, columns: &[&'static str]) -> Self {
        Self {
            header,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.render())
    }
}

/// Nodal field as `x value` lines.
pub fn write_p1(path: &Path, mesh: &Mesh1D, v: &P1Field) -> std::io::Result<()> {
    let mut s = String::new();
    for (x, y) in mesh.nodes().iter().zip(v.values()) {
        let _ = writeln!(s, "{} {}", num(*x), num(*y));
    }
    fs::write(path, s)
}

/// Elementwise field as `midpoint value` lines.
pub fn write_p0(path: &Path, mesh: &Mesh1D, v: &P0Field) -> std::io::Result<()> {
    let mut s = String::new();
    for (x, y) in mesh.midpoints().iter().zip(v.values()) {
        let _ = writeln!(s, "{} {}", num(*x), num(*y));
    }
    fs::write(path, s)
}
