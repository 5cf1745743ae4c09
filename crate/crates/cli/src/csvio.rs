//! CSV ingestion and emission. A header row is mandatory on input; numbers
//! are written as shortest round-trip decimals so re-ingestion reproduces
//! the exact matrices.

use nalgebra::{DMatrix, DVector};
use pfc_core::moments::Dataset;

use crate::CliError;

/// Read a dataset: the named response column becomes y, every other column
/// a predictor, in header order.
pub fn read_dataset(path: &str, response: &str) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot open {path}: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("{path}: cannot read header row: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let response_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| {
            CliError::input(format!(
                "{path}: response column '{response}' not found (columns: {})",
                headers.join(", ")
            ))
        })?;
    let predictor_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::input(format!("{path}: row {}: {e}", line + 2)))?;
        if record.len() != headers.len() {
            return Err(CliError::input(format!(
                "{path}: row {} has {} fields, header has {}",
                line + 2,
                record.len(),
                headers.len()
            )));
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::input(format!(
                    "{path}: row {}, column '{}': cannot parse '{}' as a number",
                    line + 2,
                    headers[col],
                    field
                ))
            })?;
            if col == response_idx {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{path}: no data rows")));
    }
    let n = rows.len();
    let p = rows[0].len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    Dataset::with_names(x, DVector::from_vec(y), Some(predictor_names))
        .map_err(|e| CliError::input(format!("{path}: {e}")))
}

/// Read a headerless p x p matrix (used for --delta-file).
pub fn read_square_matrix(path: &str) -> Result<DMatrix<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot open {path}: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{path}: row {}: {e}", line + 1)))?;
        let row: Result<Vec<f64>, CliError> = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    CliError::input(format!("{path}: row {}: bad number '{f}'", line + 1))
                })
            })
            .collect();
        rows.push(row?);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::input(format!("{path}: expected a square numeric matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Write the reduced predictors next to the response: header
/// red_1..red_d,y; one row per observation.
pub fn write_reduced_csv(
    path: &str,
    reduced: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(), CliError> {
    let mut out = String::new();
    let d = reduced.ncols();
    for j in 0..d {
        out.push_str(&format!("red_{},", j + 1));
    }
    out.push_str("y\n");
    for i in 0..reduced.nrows() {
        for j in 0..d {
            out.push_str(&format!("{},", reduced[(i, j)]));
        }
        out.push_str(&format!("{}\n", y[i]));
    }
    std::fs::write(path, out).map_err(|e| CliError::input(format!("cannot write {path}: {e}")))
}
