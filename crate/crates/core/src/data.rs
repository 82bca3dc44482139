//! Masked matrices, the fully observed response, and standardization over
//! observed cells.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math;
use crate::{Error, Result};

/// Payload stored in every masked cell. Nothing reads it; algorithms consult
/// the mask.
pub const MASKED_SENTINEL: f64 = f64::NAN;

/// An `n × p` matrix with an aligned observation mask (`true` = observed).
///
/// Invariants enforced at construction: every row has at least one observed
/// entry and every column has at least two. Masked payloads are overwritten
/// with [`MASKED_SENTINEL`], so two matrices that differ only in masked
/// payloads compare equal after construction.
#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    values: Matrix,
    mask: Vec<bool>,
}

impl PartialEq for MaskedMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
            && self.values.rows() == other.values.rows()
            && self.values.cols() == other.values.cols()
            && self
                .values
                .as_slice()
                .iter()
                .zip(other.values.as_slice())
                .zip(&self.mask)
                .all(|((a, b), &obs)| !obs || a.to_bits() == b.to_bits())
    }
}

impl MaskedMatrix {
    /// Validates the mask invariants and finiteness of observed cells.
    pub fn new(mut values: Matrix, mask: Vec<bool>) -> Result<Self> {
        let (n, p) = (values.rows(), values.cols());
        if mask.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: mask.len(),
            });
        }
        for (idx, (v, &obs)) in values.as_mut_slice().iter_mut().zip(&mask).enumerate() {
            if obs {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: idx / p,
                        col: idx % p,
                    });
                }
            } else {
                *v = MASKED_SENTINEL;
            }
        }
        let m = MaskedMatrix { values, mask };
        m.check_invariants()?;
        Ok(m)
    }

    /// A fully observed matrix.
    pub fn complete(values: Matrix) -> Result<Self> {
        let mask = vec![true; values.rows() * values.cols()];
        MaskedMatrix::new(values, mask)
    }

    /// Rows of optional cells; `None` is missing.
    pub fn from_options<R: AsRef<[Option<f64>]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * p);
        let mut mask = Vec::with_capacity(n * p);
        for r in rows {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.len(),
                });
            }
            for c in r {
                data.push(c.unwrap_or(MASKED_SENTINEL));
                mask.push(c.is_some());
            }
        }
        let values = Matrix::from_vec(n, p, data).expect("sizes checked");
        MaskedMatrix::new(values, mask)
    }

    fn check_invariants(&self) -> Result<()> {
        let (n, p) = (self.rows(), self.cols());
        for i in 0..n {
            if !self.mask[i * p..(i + 1) * p].iter().any(|&o| o) {
                return Err(Error::EmptyRowProduced(i));
            }
        }
        for j in 0..p {
            if self.observed_in_col(j) < 2 {
                return Err(Error::ColumnTooSparse(j));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols() + j]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.is_observed(i, j).then(|| self.values[(i, j)])
    }

    /// Raw storage, masked cells hold the sentinel.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        let p = self.cols();
        &self.mask[i * p..(i + 1) * p]
    }

    /// Row `i` with `None` at masked cells.
    pub fn row_options(&self, i: usize) -> Vec<Option<f64>> {
        (0..self.cols()).map(|j| self.get(i, j)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&o| o)
    }

    pub fn row_is_complete(&self, i: usize) -> bool {
        self.row_mask(i).iter().all(|&o| o)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&o| !o).count()
    }

    pub fn missing_proportion(&self) -> f64 {
        self.missing_count() as f64 / self.mask.len().max(1) as f64
    }

    pub fn observed_in_col(&self, j: usize) -> usize {
        (0..self.rows()).filter(|&i| self.is_observed(i, j)).count()
    }

    /// The values as a dense matrix; `None` if any cell is masked.
    pub fn to_complete(&self) -> Option<Matrix> {
        self.is_complete().then(|| self.values.clone())
    }

    /// Sub-matrix of the listed rows, re-validated.
    pub fn select_rows(&self, rows: &[usize]) -> Result<MaskedMatrix> {
        let p = self.cols();
        let values = self.values.select_rows(rows);
        let mut mask = Vec::with_capacity(rows.len() * p);
        for &i in rows {
            mask.extend_from_slice(self.row_mask(i));
        }
        MaskedMatrix::new(values, mask)
    }

    /// Observed-cell mean and sample standard deviation of column `j`.
    pub fn column_moments(&self, j: usize) -> Option<(f64, f64)> {
        let obs: Vec<f64> = (0..self.rows()).filter_map(|i| self.get(i, j)).collect();
        if obs.len() < 2 {
            return None;
        }
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        let ss: f64 = obs.iter().map(|v| (v - mean) * (v - mean)).sum();
        Some((mean, math::sqrt(ss / (obs.len() - 1) as f64)))
    }
}

/// Masks the listed cells of a fully observed matrix.
pub fn apply_mask(x: &MaskedMatrix, holes: &[(usize, usize)]) -> Result<MaskedMatrix> {
    if !x.is_complete() {
        return Err(Error::MissingCells);
    }
    let (n, p) = (x.rows(), x.cols());
    let mut mask = vec![true; n * p];
    for &(i, j) in holes {
        if i >= n || j >= p {
            return Err(Error::OutOfBounds { row: i, col: j });
        }
        mask[i * p + j] = false;
    }
    MaskedMatrix::new(x.values.clone(), mask)
}

/// The response; always fully observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector(Vec<f64>);

impl ResponseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(ResponseVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> ResponseVector {
        ResponseVector(rows.iter().map(|&i| self.0[i]).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Column means and sample SDs over observed cells, plus those of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl ScalingParams {
    /// Standardizes one raw row; masked cells stay `None`.
    pub fn scale_row(&self, row: &[Option<f64>]) -> Vec<Option<f64>> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| v.map(|v| (v - m) / s))
            .collect()
    }

    pub fn unscale_row(&self, row: &[Option<f64>]) -> Vec<Option<f64>> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| v.map(|v| v * s + m))
            .collect()
    }

    pub fn scale_y(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_sd
    }

    pub fn unscale_y(&self, y: f64) -> f64 {
        self.y_mean + self.y_sd * y
    }
}

/// Centers and scales every column of `x` to observed-cell mean 0 and sample
/// SD 1, and `y` likewise. The mask is unchanged.
pub fn center_scale(
    x: &MaskedMatrix,
    y: &ResponseVector,
) -> Result<(MaskedMatrix, ResponseVector, ScalingParams)> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    for j in 0..p {
        let (m, s) = x.column_moments(j).ok_or(Error::TooFewObserved(j))?;
        if !(s > 0.0) {
            return Err(Error::ZeroVarianceColumn(j));
        }
        means.push(m);
        sds.push(s);
    }
    if n < 2 {
        return Err(Error::ZeroVarianceResponse);
    }
    let ys = y.as_slice();
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let y_ss: f64 = ys.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let y_sd = math::sqrt(y_ss / (n - 1) as f64);
    if !(y_sd > 0.0) {
        return Err(Error::ZeroVarianceResponse);
    }

    let mut values = x.values.clone();
    for i in 0..n {
        let row = values.row_mut(i);
        for j in 0..p {
            if x.mask[i * p + j] {
                row[j] = (row[j] - means[j]) / sds[j];
            }
        }
    }
    let scaled = MaskedMatrix {
        values,
        mask: x.mask.clone(),
    };
    let y_scaled = ResponseVector(ys.iter().map(|v| (v - y_mean) / y_sd).collect());
    Ok((
        scaled,
        y_scaled,
        ScalingParams {
            means,
            sds,
            y_mean,
            y_sd,
        },
    ))
}
