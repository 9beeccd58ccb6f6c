use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Parse a rectangular numeric CSV. A first row that does not parse as
/// numbers is taken as a header and skipped.
pub fn parse_matrix_csv<T: Real, R: Read>(input: R) -> Result<Matrix<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut data: Vec<T> = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(idx + 1),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(idx + 1);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if idx == 0 && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {c} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (j, (p, raw)) in parsed.into_iter().zip(rec.iter()).enumerate() {
            let v = p.map_err(|_| Error::Parse {
                line,
                message: format!("column {}: '{raw}' is not a number", j + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: non-finite value '{raw}'", j + 1),
                });
            }
            data.push(T::of(v));
        }
        rows += 1;
    }
    let cols = match cols {
        Some(c) if rows > 0 => c,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "no numeric rows".to_string(),
            })
        }
    };
    Matrix::from_vec(rows, cols, data)
}

pub fn read_matrix_csv<T: Real>(path: &Path) -> Result<Matrix<T>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_matrix_csv(file).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// One row per line, values in shortest round-trip form.
pub fn format_row<T: Real>(row: &[T]) -> String {
    row.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_matrix<T: Real, W: Write>(m: &Matrix<T>, out: &mut W) -> std::io::Result<()> {
    for r in m.row_iter() {
        writeln!(out, "{}", format_row(r))?;
    }
    Ok(())
}

pub fn write_matrix_csv<T: Real>(m: &Matrix<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix(m, &mut w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}
