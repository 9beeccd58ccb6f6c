use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{SweepRecord, SweepResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = [
    "sweep_var",
    "value",
    "estimator",
    "mean_error",
    "std_error",
    "mean_runtime_s",
];

/// `printf("%g")`: 6 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e6)`.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_csv(result, BufWriter::new(file)).map_err(|e| io_err(path, e))
}

/// CSV body of [`emit_csv`] on any writer.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &result.records {
        w.write_record([
            r.sweep_var.clone(),
            format_g6(r.value),
            r.estimator.clone(),
            format_g6(r.mean_error),
            format_g6(r.std_error),
            format_g6(r.mean_runtime_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<SweepRecord>().enumerate() {
        out.push(rec.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// JSON mirror of the CSV with the same field names, plus failures.
pub fn emit_json(result: &SweepResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, result).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}
