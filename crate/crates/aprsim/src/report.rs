//! Report shapes and file output.

use std::io::Write;
use std::path::Path;

use aprsim_core::linalg::Matrix;
use aprsim_core::network::RateEstimate;
use serde::Serialize;
use serde_json::Value;

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Everything needed to reproduce a run. `duration_s` is the only field
/// that changes between identical invocations.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: Value,
    pub config: Config,
    pub seed: u64,
    pub results: Value,
    pub duration_s: f64,
}

/// Complex matrix as a dimension header plus row-major `(re, im)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&Matrix> for MatrixJson {
    fn from(m: &Matrix) -> Self {
        MatrixJson {
            dim: m.rows(),
            data: m.data().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl From<&RateEstimate> for Estimate {
    fn from(r: &RateEstimate) -> Self {
        Estimate {
            value: r.value,
            std_error: r.std_error,
        }
    }
}

/// Rows for CSV output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    /// Aligned plain-text rendering for the terminal.
    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// What a command produced, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct Output {
    pub results: Value,
    /// Machine-readable rows.
    pub table: Table,
    /// Terminal view when it differs from `table`.
    pub display: Option<Table>,
    /// Extra lines printed under the table.
    pub notes: Vec<String>,
    pub default_format: Format,
    /// Set when an iterative fit stopped at its iteration cap.
    pub not_converged: Option<String>,
}

impl Output {
    pub fn shown(&self) -> &Table {
        self.display.as_ref().unwrap_or(&self.table)
    }

    pub fn new(results: Value, table: Table, default_format: Format) -> Self {
        Output {
            results,
            table,
            display: None,
            notes: Vec::new(),
            default_format,
            not_converged: None,
        }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// Shortest representation that reads back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}
