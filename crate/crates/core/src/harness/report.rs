//! CSV reports with a `# metadata:` comment header.

use std::io::Write;

use crate::error::{Error, Result};

/// Tabular report. Lines starting with `# runtime:` carry run-dependent
/// values (wall time, worker count); everything else is the body.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub metadata: Vec<(String, String)>,
    pub runtime: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip representation in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl ExperimentReport {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn runtime(&mut self, key: &str, value: impl ToString) {
        self.runtime.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Index of `name` in the header.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric value of `name` in row `row`.
    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(name)?)?.parse().ok()
    }

    /// Everything except the runtime lines.
    pub fn body(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_parts(&mut buf, false)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_parts(out, true)
    }

    fn write_parts<W: Write>(&self, mut out: W, with_runtime: bool) -> Result<()> {
        let io = |e: std::io::Error| Error::Data(format!("write failed: {e}"));
        for (k, v) in &self.metadata {
            writeln!(out, "# metadata: {k}={v}").map_err(io)?;
        }
        if with_runtime {
            for (k, v) in &self.runtime {
                writeln!(out, "# runtime: {k}={v}").map_err(io)?;
            }
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Data(format!("write failed: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }
}
