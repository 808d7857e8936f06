//! Rectangular numeric CSV files: one matrix row per line, no quoting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::manifold::Matrix;

/// Reads a dense matrix. When `has_header` is set the first line is skipped.
/// Line and column numbers in errors are 1-based positions in the file.
pub fn read_matrix_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Matrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if has_header && idx == 0 {
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match ncols {
            None => ncols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Ingestion {
                    path: path.to_path_buf(),
                    line,
                    column: record.len().min(c) + 1,
                    message: format!("expected {c} fields, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Ingestion {
                path: path.to_path_buf(),
                line,
                column: col + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    path: path.to_path_buf(),
                    line,
                    column: col + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    Ok(Matrix::from_row_slice(nrows, ncols, &values))
}

/// Writes a matrix with 17 significant digits per entry.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut line = String::new();
    for row in m.row_iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
