//! The results CSV: one row per method × criterion × replicate.
//!
//! Columns, in order:
//!
//! | column | content |
//! |---|---|
//! | `method` | `nipals`, `mice`, `knn`, `svd` |
//! | `criterion` | `q2_loo`, `q2_kfold`, `aic`, `aic_dof`, `bic`, `bic_dof` |
//! | `cv_mode` | `standard` / `adaptative` for Q² criteria, empty otherwise |
//! | `mechanism` | `mcar`, `mar` |
//! | `d` | target missing proportion |
//! | `n`, `p`, `true_h` | cell shape and planted component count |
//! | `replicate` | replicate index within the cell |
//! | `seed` | replicate seed |
//! | `realized_d` | masked proportion actually drawn |
//! | `m` | imputed datasets pooled |
//! | `selected_h` | selected component count, empty on error |
//! | `correct` | `1` when `selected_h == true_h`, else `0` |
//! | `dof_fallback` | `1` when a DoF criterion used the naive count |
//! | `error` | error code, empty on success |
//!
//! Timings go to a separate file so the results stay byte-reproducible.

use std::io::Write;
use std::path::Path;

use plsmiss_core::selection::{Criterion, CvMode};
use plsmiss_core::simulate::{Mechanism, Method, ReplicateResult};

use crate::csv_io::fmt_f64;
use crate::error::{CliError, Result};

pub const COLUMNS: [&str; 16] = [
    "method",
    "criterion",
    "cv_mode",
    "mechanism",
    "d",
    "n",
    "p",
    "true_h",
    "replicate",
    "seed",
    "realized_d",
    "m",
    "selected_h",
    "correct",
    "dof_fallback",
    "error",
];

pub const TIMING_COLUMNS: [&str; 8] = ["method", "mechanism", "d", "n", "p", "true_h", "replicate", "seconds"];

/// A parsed results row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub criterion: Criterion,
    pub cv_mode: Option<CvMode>,
    pub mechanism: Mechanism,
    pub d: f64,
    pub n: usize,
    pub p: usize,
    pub true_h: usize,
    pub replicate: usize,
    pub seed: u64,
    pub realized_d: Option<f64>,
    pub m: usize,
    pub selected_h: Option<usize>,
    pub correct: bool,
    pub dof_fallback: bool,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn from_result(r: &ReplicateResult, cv_mode: CvMode) -> ResultRow {
        ResultRow {
            method: r.method,
            criterion: r.criterion,
            cv_mode: r.criterion.is_cross_validated().then_some(cv_mode),
            mechanism: r.mechanism,
            d: r.d,
            n: r.n,
            p: r.p,
            true_h: r.true_h,
            replicate: r.replicate,
            seed: r.seed,
            realized_d: r.realized_d.is_finite().then_some(r.realized_d),
            m: r.m,
            selected_h: r.selected_h,
            correct: r.is_correct(),
            dof_fallback: r.dof_fallback,
            error: r.error.as_ref().map(|e| e.code().to_owned()),
        }
    }

    pub fn fields(&self) -> [String; 16] {
        let flag = |b: bool| if b { "1" } else { "0" }.to_owned();
        [
            self.method.name().to_owned(),
            self.criterion.name().to_owned(),
            self.cv_mode.map(|m| m.name().to_owned()).unwrap_or_default(),
            self.mechanism.name().to_owned(),
            fmt_f64(self.d),
            self.n.to_string(),
            self.p.to_string(),
            self.true_h.to_string(),
            self.replicate.to_string(),
            self.seed.to_string(),
            self.realized_d.map(fmt_f64).unwrap_or_default(),
            self.m.to_string(),
            self.selected_h.map(|h| h.to_string()).unwrap_or_default(),
            flag(self.correct),
            flag(self.dof_fallback),
            self.error.clone().unwrap_or_default(),
        ]
    }

    /// Identifies the row; duplicates of a key are the same measurement.
    pub fn key(&self) -> (Method, Criterion, Option<CvMode>, Mechanism, u64, usize, usize, usize, usize) {
        (
            self.method,
            self.criterion,
            self.cv_mode,
            self.mechanism,
            self.d.to_bits(),
            self.n,
            self.p,
            self.true_h,
            self.replicate,
        )
    }

    pub fn parse(record: &csv::StringRecord, line: usize) -> Result<ResultRow> {
        let bad = |col: &str, v: &str| CliError::Data(format!("results line {line}: bad {col} {v:?}"));
        if record.len() != COLUMNS.len() {
            return Err(CliError::Data(format!(
                "results line {line}: {} fields, expected {}",
                record.len(),
                COLUMNS.len()
            )));
        }
        let f = |i: usize| &record[i];
        let usize_at = |i: usize| f(i).parse::<usize>().map_err(|_| bad(COLUMNS[i], f(i)));
        let f64_at = |i: usize| {
            f(i).parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(COLUMNS[i], f(i)))
        };
        let flag_at = |i: usize| match f(i) {
            "1" => Ok(true),
            "0" => Ok(false),
            v => Err(bad(COLUMNS[i], v)),
        };
        let opt = |i: usize| (!f(i).is_empty()).then(|| f(i));
        let row = ResultRow {
            method: Method::from_name(f(0)).ok_or_else(|| bad("method", f(0)))?,
            criterion: Criterion::from_name(f(1)).ok_or_else(|| bad("criterion", f(1)))?,
            cv_mode: opt(2)
                .map(|v| CvMode::from_name(v).ok_or_else(|| bad("cv_mode", v)))
                .transpose()?,
            mechanism: Mechanism::from_name(f(3)).ok_or_else(|| bad("mechanism", f(3)))?,
            d: f64_at(4)?,
            n: usize_at(5)?,
            p: usize_at(6)?,
            true_h: usize_at(7)?,
            replicate: usize_at(8)?,
            seed: f(9).parse::<u64>().map_err(|_| bad("seed", f(9)))?,
            realized_d: opt(10).map(|_| f64_at(10)).transpose()?,
            m: usize_at(11)?,
            selected_h: opt(12).map(|_| usize_at(12)).transpose()?,
            correct: flag_at(13)?,
            dof_fallback: flag_at(14)?,
            error: opt(15).map(str::to_owned),
        };
        if row.correct != (row.selected_h == Some(row.true_h)) {
            return Err(CliError::Data(format!("results line {line}: `correct` disagrees with selected_h")));
        }
        if row.criterion.is_cross_validated() != row.cv_mode.is_some() {
            return Err(CliError::Data(format!("results line {line}: cv_mode does not match criterion")));
        }
        Ok(row)
    }
}

/// Renders rows exactly as the results file stores them, header excluded.
pub fn render_rows(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row.fields())
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

pub fn header_line() -> String {
    let mut s = COLUMNS.join(",");
    s.push('\n');
    s
}

/// Streams results rows (with the header first).
#[derive(Debug)]
pub struct ResultsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ResultsWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner
            .write_record(COLUMNS)
            .map_err(|e| CliError::Data(e.to_string()))?;
        Ok(ResultsWriter { inner })
    }

    pub fn write(&mut self, row: &ResultRow) -> std::io::Result<()> {
        self.inner.write_record(row.fields()).map_err(std::io::Error::other)
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Reads and validates a results file. Rows must carry exactly the
/// documented columns, in order.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_results_from(file, &path.display().to_string())
}

pub fn read_results_from(reader: impl std::io::Read, name: &str) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{name}: {e}")))?
        .clone();
    if headers.iter().ne(COLUMNS.iter().copied()) {
        return Err(CliError::Data(format!(
            "{name}: schema mismatch, expected columns {}",
            COLUMNS.join(",")
        )));
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| CliError::Data(format!("{name}: {e}")))?;
            ResultRow::parse(&rec, i + 2)
        })
        .collect()
}
