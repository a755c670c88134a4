//! CSV helpers. Numbers are written in the shortest form that parses back
//! to the same `f64`.

use std::io::Write;

use crate::CliError;

/// Shortest round-trip decimal form of `v`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `fmt_f64`, or an empty cell for `None`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// A CSV table held in memory until it is written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Writes `table` to `path`, or to stdout when `path` is `None` or `-`.
pub fn emit(table: &Table, path: Option<&std::path::Path>) -> Result<(), CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => table.write(std::io::BufWriter::new(std::fs::File::create(p)?)),
        _ => table.write(std::io::stdout().lock()),
    }
}
