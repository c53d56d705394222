//! CSV and JSON writers. Numbers are written with 17 significant digits in
//! exponent form so files are locale-independent and round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use csv::{Terminator, WriterBuilder};
use serde::Serialize;

use sea_walk_core::observables::{JpdSnapshot, ObservableRow};

use crate::error::{CliError, Result};

pub const OBSERVABLES_FILE: &str = "observables.csv";
pub const JPD_T0_FILE: &str = "jpd_t0.csv";
pub const JPD_TFINAL_FILE: &str = "jpd_tfinal.csv";
pub const JPD_EXTRA_FILE: &str = "jpd_snapshots.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

pub(crate) fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub(crate) fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.to_path_buf(), source }
}

pub fn write_observables(path: &Path, rows: &[ObservableRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ObservableRow::COLUMNS).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.values().iter().map(|&v| format_float(v))).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Long format `t,m,n,p`, one line per site pair.
pub fn write_jpd<'a>(path: &Path, snapshots: impl IntoIterator<Item = &'a JpdSnapshot>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "m", "n", "p"]).map_err(csv_err(path))?;
    for snap in snapshots {
        let t = format_float(snap.time);
        for (m, n, p) in snap.entries() {
            w.write_record([t.as_str(), &m.to_string(), &n.to_string(), &format_float(p)]).map_err(csv_err(path))?;
        }
    }
    finish(w, path)
}

pub fn write_json<T: Serialize>(path: &Path, what: &'static str, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| CliError::Json { what, source })?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}
