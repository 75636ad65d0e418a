//! Output plumbing: one document, two faithful renderings.
//!
//! Every command assembles a [`Document`] holding the same `f64` values for
//! both renderings; CSV cells go through `Display` and JSON through
//! `serde_json`, which both print the shortest string that parses back to
//! the identical bits, so the two formats carry identical numbers.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    /// Rendered as the empty field (a value that does not apply).
    Empty,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Num(x) => {
                let _ = write!(out, "{x}");
            }
            Cell::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Cell::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Cell::Text(s) => out.push_str(s),
            Cell::Empty => {}
        }
    }
}

/// One command's output: a CSV table (with optional `#`-prefixed footer
/// lines) and the JSON value carrying the same numbers.
pub struct Document {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Key/value pairs appended after the table as `# key,value` lines.
    pub footer: Vec<(String, Cell)>,
    pub json: serde_json::Value,
}

impl Document {
    fn render_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        for (key, value) in &self.footer {
            out.push_str("# ");
            out.push_str(key);
            out.push(',');
            value.render(&mut out);
            out.push('\n');
        }
        out
    }

    fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }
}

/// Write the rendering to the file or to stdout.
pub fn emit(doc: &Document, format: Format, output: Option<&PathBuf>) -> io::Result<()> {
    let text = doc.render(format);
    match output {
        Some(path) => fs::write(path, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}
