//! Delimited-text serialization of sweep rows.

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::sweep::SweepRow;

/// Column names, in order.
pub const HEADER: [&str; 11] = [
    "fiber_length_km",
    "theta_deg",
    "x_pct",
    "rate",
    "e_z",
    "e_x_upper",
    "q_det",
    "q1_lo",
    "mu_s_opt",
    "mu_d1_opt",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Tsv,
}

impl Format {
    pub fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Tsv => "tsv",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            other => Err(format!("unknown format {other:?}, expected csv or tsv")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("nothing to write")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Twelve significant digits in scientific notation.
pub fn format_number(v: f64) -> String {
    format!("{v:.11e}")
}

fn record(row: &SweepRow) -> [String; 11] {
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    [
        format_number(row.fiber_length_km),
        format_number(row.theta_deg),
        format_number(row.x_pct),
        format_number(row.rate),
        format_number(row.e_z),
        format_number(row.e_x_upper),
        format_number(row.q_det),
        format_number(row.q1_lo),
        opt(row.mu_s_opt),
        opt(row.mu_d1_opt),
        row.status.as_str().to_string(),
    ]
}

pub fn write_rows<W: Write>(writer: W, rows: &[SweepRow], format: Format) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .from_writer(writer);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()
}

/// Writes `rows` to `path`, or to stdout when `path` is `-`.
pub fn emit(rows: &[SweepRow], path: &Path, format: Format) -> Result<(), EmitError> {
    if rows.is_empty() {
        return Err(EmitError::Empty);
    }
    let io_err = |source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path == Path::new("-") {
        return write_rows(io::stdout().lock(), rows, format).map_err(io_err);
    }
    let file = File::create(path).map_err(io_err)?;
    write_rows(io::BufWriter::new(file), rows, format).map_err(io_err)
}
