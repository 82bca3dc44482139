//! Numeric CSV tables. The first row is a header; an empty field or `NA`
//! marks a missing cell.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use plsmiss_core::{MaskedMatrix, Matrix, ResponseVector};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Predictors and response read from one table.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<String>,
    pub response: String,
    pub x: MaskedMatrix,
    pub y: ResponseVector,
}

pub fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "NA"
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_table(file, &path.display().to_string())
}

pub fn parse_table(reader: impl std::io::Read, name: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{name}: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{name}: missing header row")));
    }
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                if is_missing(field) {
                    Ok(None)
                } else {
                    field.parse::<f64>().map(Some).map_err(|_| {
                        CliError::Data(format!("{name}: row {}, column {}: cannot parse {field:?}", r + 1, headers[c]))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{name}: no data rows")));
    }
    Ok(Table { headers, rows })
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Splits off the response column (by name, or the last column) and
    /// builds the predictor matrix.
    pub fn into_dataset(self, response: Option<&str>) -> Result<Dataset> {
        let r = match response {
            Some(name) => self
                .column_index(name)
                .ok_or_else(|| CliError::Data(format!("response column {name:?} not found")))?,
            None => self.headers.len() - 1,
        };
        if self.headers.len() < 2 {
            return Err(CliError::Data("need at least one predictor and a response".into()));
        }
        let mut y = Vec::with_capacity(self.rows.len());
        let mut x = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.into_iter().enumerate() {
            let value = row[r].ok_or_else(|| CliError::Data(format!("response is missing at row {}", i + 1)))?;
            y.push(value);
            x.push(
                row.into_iter()
                    .enumerate()
                    .filter(|&(c, _)| c != r)
                    .map(|(_, v)| v)
                    .collect::<Vec<_>>(),
            );
        }
        let response = self.headers[r].clone();
        let features: Vec<String> = self
            .headers
            .into_iter()
            .enumerate()
            .filter(|&(c, _)| c != r)
            .map(|(_, h)| h)
            .collect();
        Ok(Dataset {
            features,
            response,
            x: MaskedMatrix::from_options(&x)?,
            y: ResponseVector::new(y)?,
        })
    }

    /// Rows restricted to the named columns, in that order.
    pub fn select_columns(&self, names: &[String]) -> Result<Vec<Vec<Option<f64>>>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| CliError::Data(format!("column {n:?} not found")))
            })
            .collect::<Result<_>>()?;
        Ok(self.rows.iter().map(|row| idx.iter().map(|&c| row[c]).collect()).collect())
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_matrix(path: &Path, headers: &[String], m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io_error(path, e))?;
    w.write_record(headers).map_err(|e| csv_io_error(path, e))?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|&v| fmt_f64(v)))
            .map_err(|e| csv_io_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub(crate) fn csv_io_error(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}
