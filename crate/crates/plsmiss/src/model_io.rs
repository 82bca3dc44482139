//! Plain-text model files.
//!
//! ```text
//! plsmiss-model 1
//! response y
//! features x1 x2 x3
//! degenerate_at none
//! means ...
//! sds ...
//! y_mean ...
//! y_sd ...
//! y_coefficients ...
//! weights 3 2
//! <3 rows of 2 values>
//! loadings 3 2
//! ...
//! scores n 2
//! ...
//! ```
//!
//! Fields are tab separated and floats are written in shortest round-trip
//! form, so a loaded model predicts bit for bit like the saved one.

use std::path::Path;

use plsmiss_core::{Matrix, PlsModel, ScalingParams};

use crate::csv_io::{fmt_f64, write_text};
use crate::error::{CliError, Result};

pub const MAGIC: &str = "plsmiss-model 1";

#[derive(Debug, Clone)]
pub struct SavedModel {
    pub response: String,
    pub features: Vec<String>,
    pub model: PlsModel,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join("\t")
}

fn push_matrix(out: &mut String, name: &str, m: &Matrix) {
    out.push_str(&format!("{name}\t{}\t{}\n", m.rows(), m.cols()));
    for i in 0..m.rows() {
        out.push_str(&join(m.row(i)));
        out.push('\n');
    }
}

pub fn to_text(saved: &SavedModel) -> String {
    let m = &saved.model;
    let s = &m.scaling;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("response\t{}\n", saved.response));
    out.push_str(&format!("features\t{}\n", saved.features.join("\t")));
    match m.degenerate_at {
        Some(k) => out.push_str(&format!("degenerate_at\t{k}\n")),
        None => out.push_str("degenerate_at\tnone\n"),
    }
    out.push_str(&format!("means\t{}\n", join(&s.means)));
    out.push_str(&format!("sds\t{}\n", join(&s.sds)));
    out.push_str(&format!("y_mean\t{}\n", fmt_f64(s.y_mean)));
    out.push_str(&format!("y_sd\t{}\n", fmt_f64(s.y_sd)));
    out.push_str(&format!("y_coefficients\t{}\n", join(&m.y_coefficients)));
    push_matrix(&mut out, "weights", &m.weights);
    push_matrix(&mut out, "loadings", &m.loadings);
    push_matrix(&mut out, "scores", &m.scores);
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (no, line) = self
            .inner
            .next()
            .ok_or_else(|| CliError::Data(format!("model file ends before {key:?}")))?;
        let mut fields = line.split('\t');
        let head = fields.next().unwrap_or_default();
        if !key.is_empty() && head != key {
            return Err(CliError::Data(format!("model file line {}: expected {key:?}, found {head:?}", no + 1)));
        }
        let rest = if key.is_empty() { line.split('\t').collect() } else { fields.collect() };
        Ok((no + 1, rest))
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>> {
        let (no, fields) = self.next(key)?;
        parse_floats(no, &fields)
    }

    fn float(&mut self, key: &str) -> Result<f64> {
        let v = self.floats(key)?;
        match v[..] {
            [x] => Ok(x),
            _ => Err(CliError::Data(format!("model file: {key} needs one value"))),
        }
    }

    fn matrix(&mut self, key: &str) -> Result<Matrix> {
        let (no, dims) = self.next(key)?;
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CliError::Data(format!("model file line {no}: bad dimension {s:?}")))
        };
        let (rows, cols) = match dims[..] {
            [r, c] => (parse(r)?, parse(c)?),
            _ => return Err(CliError::Data(format!("model file line {no}: {key} needs rows and cols"))),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = self.floats("")?;
            if row.len() != cols && cols > 0 {
                return Err(CliError::Data(format!("model file: {key} row has {} values, expected {cols}", row.len())));
            }
            data.extend(row);
        }
        Matrix::from_vec(rows, cols, data).ok_or_else(|| CliError::Data(format!("model file: bad {key} shape")))
    }
}

fn parse_floats(no: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .filter(|f| !f.is_empty())
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| CliError::Data(format!("model file line {no}: cannot parse {f:?}")))
        })
        .collect()
}

pub fn from_text(text: &str) -> Result<SavedModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    match lines.inner.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(CliError::Data(format!("not a model file (expected {MAGIC:?} header)"))),
    }
    let (_, response) = lines.next("response")?;
    let response = response.join("\t");
    let (_, features) = lines.next("features")?;
    let features: Vec<String> = features.into_iter().map(str::to_owned).collect();
    let (no, degenerate) = lines.next("degenerate_at")?;
    let degenerate_at = match degenerate[..] {
        ["none"] => None,
        [k] => Some(
            k.parse::<usize>()
                .map_err(|_| CliError::Data(format!("model file line {no}: bad degenerate_at {k:?}")))?,
        ),
        _ => return Err(CliError::Data(format!("model file line {no}: bad degenerate_at"))),
    };
    let means = lines.floats("means")?;
    let sds = lines.floats("sds")?;
    let y_mean = lines.float("y_mean")?;
    let y_sd = lines.float("y_sd")?;
    let y_coefficients = lines.floats("y_coefficients")?;
    let weights = lines.matrix("weights")?;
    let loadings = lines.matrix("loadings")?;
    let scores = lines.matrix("scores")?;
    if features.len() != means.len() {
        return Err(CliError::Data(format!(
            "model file: {} feature names but {} means",
            features.len(),
            means.len()
        )));
    }
    let scaling = ScalingParams {
        means,
        sds,
        y_mean,
        y_sd,
    };
    let model = PlsModel::from_parts(weights, loadings, scores, y_coefficients, scaling, degenerate_at)
        .map_err(|e| CliError::Data(format!("model file: {e}")))?;
    Ok(SavedModel {
        response,
        features,
        model,
    })
}

pub fn save(path: &Path, saved: &SavedModel) -> Result<()> {
    write_text(path, &to_text(saved))
}

pub fn load(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_text(&text)
}
