//! CSV input: tabular datasets for audits and numeric sample files for the
//! direct two-sample test.

use std::collections::BTreeMap;
use std::path::Path;

use clot_core::{Column, ColumnData, ColumnRole, Dataset, Matrix};

use crate::error::{csv_err, io_err, CliError, Result};

/// Cells treated as missing.
const MISSING: &[&str] = &["", "na", "nan", "null", "none", "?"];

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    MISSING.iter().any(|m| t.eq_ignore_ascii_case(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    /// Rows dropped for a missing value in a declared column.
    pub dropped_rows: usize,
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

/// Reads the declared columns of `path`. A column is numeric when every
/// kept cell parses as a finite number, categorical otherwise. Columns with
/// role `ignored` are read and kept so predictors can still use them.
pub fn ingest_csv(path: &Path, roles: &BTreeMap<String, ColumnRole>) -> Result<Ingested> {
    let mut reader = open(path)?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let mut declared = Vec::with_capacity(roles.len());
    for (name, &role) in roles {
        let idx = header.iter().position(|h| h == name).ok_or_else(|| CliError::MissingColumn {
            path: path.to_path_buf(),
            column: name.clone(),
        })?;
        declared.push((idx, name.as_str(), role));
    }
    // Columns keep file order.
    declared.sort_by_key(|d| d.0);
    let indices: Vec<usize> = declared.iter().map(|d| d.0).collect();

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); indices.len()];
    let mut dropped = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let row: Vec<&str> = indices.iter().map(|&i| record.get(i).unwrap_or("")).collect();
        if row.iter().any(|c| is_missing(c)) {
            dropped += 1;
            continue;
        }
        for (col, cell) in cells.iter_mut().zip(row) {
            col.push(cell.to_string());
        }
    }
    if cells.first().is_none_or(|c| c.is_empty()) {
        return Err(CliError::NoRows { path: path.to_path_buf() });
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing values", path.display());
    }

    let columns = declared
        .iter()
        .zip(cells)
        .map(|(&(_, name, role), raw)| {
            let parsed: Option<Vec<f64>> = raw
                .iter()
                .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect();
            match parsed {
                Some(values) => Column::numeric(name, role, values),
                None => Column::categorical(name, role, raw),
            }
        })
        .collect();
    Ok(Ingested {
        dataset: Dataset::new(columns)?,
        dropped_rows: dropped,
    })
}

/// Writes a dataset with a header row. Numbers use the shortest text that
/// parses back to the same value.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header: Vec<&str> = dataset.columns().iter().map(|c| c.name.as_str()).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for row in 0..dataset.n_rows() {
        let record: Vec<String> = dataset
            .columns()
            .iter()
            .map(|c| match &c.data {
                ColumnData::Numeric(v) => format!("{:?}", v[row]),
                ColumnData::Categorical(v) => v[row].clone(),
            })
            .collect();
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// A header-first file of numeric columns, one sample per row.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut reader = open(path)?;
    let width = reader.headers().map_err(csv_err(path))?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        // Header is line 1.
        let line = k as u64 + 2;
        if record.len() != width {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for cell in record.iter() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{cell}` is not a finite number"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::NoRows { path: path.to_path_buf() });
    }
    Ok(Matrix::new(rows, width, data)?)
}

pub fn write_matrix(m: &Matrix, header_prefix: &str, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = (0..m.cols()).map(|j| format!("{header_prefix}{j}")).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for row in m.iter_rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_markers() {
        for c in ["", " ", "NA", "nan", "NULL", "?"] {
            assert!(is_missing(c), "{c:?}");
        }
        assert!(!is_missing("0"));
        assert!(!is_missing("north"));
    }
}
