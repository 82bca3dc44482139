//! NIPALS-PLSR (single response) on complete or incomplete predictors.
//!
//! For every component the weight `w_h ∝ X_{h-1}ᵗ y_{h-1}` is normalized,
//! the score `t_h = X_{h-1} w_h / w_hᵗ w_h`, the x-loading
//! `q_h = X_{h-1}ᵗ t_h / t_hᵗ t_h` and the y-coefficient
//! `c_h = y_{h-1}ᵗ t_h / t_hᵗ t_h`; then `X` and `y` are deflated. With
//! masked cells each inner product runs over the observed positions of the
//! row or column it belongs to, and deflation only touches observed cells.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{center_scale, MaskedMatrix, ResponseVector, ScalingParams};
use crate::error::Axis;
use crate::linalg::{dot, norm, Lu, Matrix};
use crate::{Error, Result};

/// Scores with `tᵗt` below this stop the extraction.
pub const DEGENERATE_SCORE_NORM: f64 = 1e-12;

/// How the scores of a new row are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// Regular projection `t = x W (QᵗW)⁻¹` when the row is fully observed;
    /// rows with missing cells still go through the missing-data path.
    Regular,
    /// Sequential scores over the observed positions only,
    /// `t_l = Σ_J x_j w_lj / Σ_J w_lj²`, with deflation on those positions.
    MissingSpecific,
}

/// A fitted PLS1 model. Matrices are in standardized units.
#[derive(Debug, Clone)]
pub struct PlsModel {
    /// `p × H`, unit-norm columns.
    pub weights: Matrix,
    /// `p × H`.
    pub loadings: Matrix,
    /// `n × H` training scores.
    pub scores: Matrix,
    pub y_coefficients: Vec<f64>,
    pub scaling: ScalingParams,
    /// Set when extraction stopped before the requested count: the
    /// one-based component that was degenerate.
    pub degenerate_at: Option<usize>,
    // W_h (Q_hᵗ W_h)⁻¹ for every prefix h, cached for the regular path.
    projections: Vec<Matrix>,
}

/// Largest valid component count for an `n × p` problem.
pub fn max_components(n: usize, p: usize) -> usize {
    n.saturating_sub(1).min(p)
}

/// Standardizes `x` and `y` over observed cells and extracts up to `h`
/// components.
///
/// If component `k` turns out degenerate (`t_kᵗ t_k < 1e-12`) the model is
/// returned with `k - 1` components and `degenerate_at = Some(k)`; a
/// degenerate first component is an error.
pub fn fit(x: &MaskedMatrix, y: &ResponseVector, h: usize) -> Result<PlsModel> {
    let (n, p) = (x.rows(), x.cols());
    let max = max_components(n, p);
    if h == 0 || h > max {
        return Err(Error::InvalidComponentCount { requested: h, max });
    }
    let (xs, ys, scaling) = center_scale(x, y)?;
    let mask = xs.mask();
    let mut resid = xs.values().clone();
    let mut y_res = ys.into_vec();

    let mut weights = Vec::with_capacity(h);
    let mut loadings = Vec::with_capacity(h);
    let mut scores = Vec::with_capacity(h);
    let mut coefs = Vec::with_capacity(h);
    let mut degenerate_at = None;

    for comp in 1..=h {
        let Some(mut w) = weight_step(&resid, mask, &y_res) else {
            degenerate_at = Some(comp);
            break;
        };
        let wn = norm(&w);
        if !(wn > 0.0) || !wn.is_finite() {
            degenerate_at = Some(comp);
            break;
        }
        w.iter_mut().for_each(|v| *v /= wn);

        let mut t = vec![0.0; n];
        for (i, ti) in t.iter_mut().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..p {
                if mask[i * p + j] {
                    num += resid[(i, j)] * w[j];
                    den += w[j] * w[j];
                }
            }
            if den <= 0.0 {
                return Err(Error::EmptyIndexSet {
                    axis: Axis::Row,
                    index: i,
                    component: comp,
                });
            }
            *ti = num / den;
        }
        let tt = dot(&t, &t);
        if tt < DEGENERATE_SCORE_NORM {
            degenerate_at = Some(comp);
            break;
        }

        let mut q = vec![0.0; p];
        for (j, qj) in q.iter_mut().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, &ti) in t.iter().enumerate() {
                if mask[i * p + j] {
                    num += resid[(i, j)] * ti;
                    den += ti * ti;
                }
            }
            if den <= 0.0 {
                return Err(Error::EmptyIndexSet {
                    axis: Axis::Column,
                    index: j,
                    component: comp,
                });
            }
            *qj = num / den;
        }

        for i in 0..n {
            for j in 0..p {
                if mask[i * p + j] {
                    resid[(i, j)] -= t[i] * q[j];
                }
            }
        }
        let c = dot(&y_res, &t) / tt;
        for (yi, ti) in y_res.iter_mut().zip(&t) {
            *yi -= c * ti;
        }
        weights.push(w);
        loadings.push(q);
        scores.push(t);
        coefs.push(c);
    }

    if weights.is_empty() {
        return Err(Error::ComponentDegenerate(1));
    }
    let k = weights.len();
    let to_matrix = |cols: &[Vec<f64>], rows: usize| Matrix::from_fn(rows, k, |i, c| cols[c][i]);
    PlsModel::from_parts(
        to_matrix(&weights, p),
        to_matrix(&loadings, p),
        to_matrix(&scores, n),
        coefs,
        scaling,
        degenerate_at,
    )
}

// w_j = Σ_{i obs in j} x_ij y_i / Σ_{i obs in j} y_i² (before normalization).
fn weight_step(resid: &Matrix, mask: &[bool], y: &[f64]) -> Option<Vec<f64>> {
    let (n, p) = (resid.rows(), resid.cols());
    let mut w = vec![0.0; p];
    for (j, wj) in w.iter_mut().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            if mask[i * p + j] {
                num += resid[(i, j)] * y[i];
                den += y[i] * y[i];
            }
        }
        if !(den > 0.0) {
            return None;
        }
        *wj = num / den;
    }
    Some(w)
}

impl PlsModel {
    /// Reassembles a model from stored parts (e.g. a serialized file).
    pub fn from_parts(
        weights: Matrix,
        loadings: Matrix,
        scores: Matrix,
        y_coefficients: Vec<f64>,
        scaling: ScalingParams,
        degenerate_at: Option<usize>,
    ) -> Result<PlsModel> {
        let h = y_coefficients.len();
        let p = scaling.means.len();
        for (m, rows) in [(&weights, p), (&loadings, p), (&scores, scores.rows())] {
            if m.cols() != h || m.rows() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows * h,
                    found: m.rows() * m.cols(),
                });
            }
        }
        if scaling.sds.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: scaling.sds.len(),
            });
        }
        let mut projections = Vec::with_capacity(h);
        for k in 1..=h {
            let qw = Matrix::from_fn(k, k, |a, b| {
                (0..p).map(|j| loadings[(j, a)] * weights[(j, b)]).sum()
            });
            let lu = Lu::new(&qw).ok_or(Error::ComponentDegenerate(k))?;
            let inv = lu.inverse();
            projections.push(weights.leading_cols(k).matmul(&inv));
        }
        Ok(PlsModel {
            weights,
            loadings,
            scores,
            y_coefficients,
            scaling,
            degenerate_at,
            projections,
        })
    }

    /// Number of extracted components.
    pub fn n_components(&self) -> usize {
        self.y_coefficients.len()
    }

    pub fn n_features(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_train(&self) -> usize {
        self.scores.rows()
    }

    fn check_h(&self, h: usize) -> Result<()> {
        if h > self.n_components() {
            return Err(Error::InvalidComponentCount {
                requested: h,
                max: self.n_components(),
            });
        }
        Ok(())
    }

    /// Training fitted values with `h` components, standardized units.
    pub fn fitted(&self, h: usize) -> Result<Vec<f64>> {
        self.check_h(h)?;
        let n = self.n_train();
        Ok((0..n)
            .map(|i| (0..h).map(|l| self.y_coefficients[l] * self.scores[(i, l)]).sum())
            .collect())
    }

    /// Predicts `y` (original units) for a raw row using `h` components.
    pub fn predict(&self, row: &[Option<f64>], h: usize, mode: PredictionMode) -> Result<f64> {
        let scaled = self.scaling.scale_row(row);
        let y = self.predict_scaled(&scaled, h, mode)?;
        Ok(self.scaling.unscale_y(y))
    }

    /// Predictions for `h = 1..=H` at once (original units).
    pub fn predict_all(&self, row: &[Option<f64>], mode: PredictionMode) -> Result<Vec<f64>> {
        let scaled = self.scaling.scale_row(row);
        let complete = scaled.iter().all(Option::is_some);
        if !scaled.iter().any(Option::is_some) {
            return Err(Error::AllMissingRow);
        }
        let out: Vec<f64> = if complete && mode == PredictionMode::Regular {
            let x: Vec<f64> = scaled.iter().map(|v| v.unwrap()).collect();
            (1..=self.n_components())
                .map(|h| self.regular_scaled(&x, h))
                .collect()
        } else {
            let scores = self.missing_scores(&scaled, self.n_components());
            let mut acc = 0.0;
            scores
                .iter()
                .zip(&self.y_coefficients)
                .map(|(t, c)| {
                    acc += c * t;
                    acc
                })
                .collect()
        };
        Ok(out.into_iter().map(|y| self.scaling.unscale_y(y)).collect())
    }

    /// Prediction from an already standardized row, in standardized units.
    pub fn predict_scaled(&self, row: &[Option<f64>], h: usize, mode: PredictionMode) -> Result<f64> {
        self.check_h(h)?;
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        if !row.iter().any(Option::is_some) {
            return Err(Error::AllMissingRow);
        }
        if h == 0 {
            return Ok(0.0);
        }
        if mode == PredictionMode::Regular && row.iter().all(Option::is_some) {
            let x: Vec<f64> = row.iter().map(|v| v.unwrap()).collect();
            return Ok(self.regular_scaled(&x, h));
        }
        let t = self.missing_scores(row, h);
        Ok(t.iter().zip(&self.y_coefficients).map(|(t, c)| t * c).sum())
    }

    fn regular_scaled(&self, x: &[f64], h: usize) -> f64 {
        let proj = &self.projections[h - 1];
        (0..h)
            .map(|l| {
                let t: f64 = (0..x.len()).map(|j| x[j] * proj[(j, l)]).sum();
                t * self.y_coefficients[l]
            })
            .sum()
    }

    fn missing_scores(&self, row: &[Option<f64>], h: usize) -> Vec<f64> {
        let p = self.n_features();
        let mut resid: Vec<f64> = row.iter().map(|v| v.unwrap_or(0.0)).collect();
        let mut out = Vec::with_capacity(h);
        for l in 0..h {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..p {
                if row[j].is_some() {
                    let w = self.weights[(j, l)];
                    num += resid[j] * w;
                    den += w * w;
                }
            }
            let t = if den > 0.0 { num / den } else { 0.0 };
            for j in 0..p {
                if row[j].is_some() {
                    resid[j] -= t * self.loadings[(j, l)];
                }
            }
            out.push(t);
        }
        out
    }

    /// Regression coefficients in original units for `h` components:
    /// `(intercept, slopes)`, from the regular projection.
    pub fn coefficients(&self, h: usize) -> Result<(f64, Vec<f64>)> {
        self.check_h(h)?;
        let p = self.n_features();
        let mut beta = vec![0.0; p];
        if h > 0 {
            let proj = &self.projections[h - 1];
            for (j, b) in beta.iter_mut().enumerate() {
                *b = (0..h).map(|l| proj[(j, l)] * self.y_coefficients[l]).sum();
            }
        }
        let s = &self.scaling;
        let slopes: Vec<f64> = beta
            .iter()
            .zip(&s.sds)
            .map(|(b, sd)| s.y_sd * b / sd)
            .collect();
        let intercept = s.y_mean - slopes.iter().zip(&s.means).map(|(b, m)| b * m).sum::<f64>();
        Ok((intercept, slopes))
    }
}

/// In-sample residual sum of squares with `h` components, in standardized
/// units; `y` is the training response in original units.
pub fn fitted_rss(model: &PlsModel, y: &ResponseVector, h: usize) -> Result<f64> {
    if y.len() != model.n_train() {
        return Err(Error::DimensionMismatch {
            expected: model.n_train(),
            found: y.len(),
        });
    }
    let fitted = model.fitted(h)?;
    Ok(y.as_slice()
        .iter()
        .zip(&fitted)
        .map(|(&yi, f)| {
            let r = model.scaling.scale_y(yi) - f;
            r * r
        })
        .sum())
}

/// `RSS_h` for `h = 0..=H`.
pub fn rss_trace(model: &PlsModel, y: &ResponseVector) -> Result<Vec<f64>> {
    (0..=model.n_components()).map(|h| fitted_rss(model, y, h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::apply_mask;

    fn toy(n: usize, p: usize) -> (MaskedMatrix, ResponseVector) {
        let x = Matrix::from_fn(n, p, |i, j| libm::sin(((i * p + j) as f64 * 0.77).powi(2)) + 0.1 * i as f64);
        let y: Vec<f64> = (0..n)
            .map(|i| x.row(i).iter().enumerate().map(|(j, v)| v * (j as f64 - 1.0)).sum::<f64>() + libm::cos(i as f64))
            .collect();
        (MaskedMatrix::complete(x).unwrap(), ResponseVector::new(y).unwrap())
    }

    #[test]
    fn single_predictor_is_simple_regression() {
        let xs = [1.0, 2.0, 4.0, 7.0, 8.0];
        let ys = [2.0, 3.5, 4.0, 9.0, 8.5];
        let x = MaskedMatrix::complete(Matrix::from_vec(5, 1, xs.to_vec()).unwrap()).unwrap();
        let y = ResponseVector::new(ys.to_vec()).unwrap();
        let model = fit(&x, &y, 1).unwrap();
        let mx = xs.iter().sum::<f64>() / 5.0;
        let my = ys.iter().sum::<f64>() / 5.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        for i in 0..5 {
            let pred = model.predict(&[Some(xs[i])], 1, PredictionMode::Regular).unwrap();
            let ols = my + slope * (xs[i] - mx);
            assert!((pred - ols).abs() < 1e-10);
        }
    }

    #[test]
    fn weights_unit_norm_and_scores_orthogonal() {
        let (x, y) = toy(15, 5);
        let m = fit(&x, &y, 4).unwrap();
        assert_eq!(m.n_components(), 4, "{:?}", m.degenerate_at);
        for a in 0..4 {
            let wa = m.weights.col(a);
            assert!((norm(&wa) - 1.0).abs() < 1e-10);
            for b in 0..a {
                let ta = m.scores.col(a);
                let tb = m.scores.col(b);
                assert!(dot(&ta, &tb).abs() <= 1e-8 * norm(&ta) * norm(&tb));
                assert!(dot(&wa, &m.weights.col(b)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn rss_is_non_increasing_and_starts_at_n_minus_one() {
        let (x, y) = toy(12, 4);
        let m = fit(&x, &y, 4).unwrap();
        let rss = rss_trace(&m, &y).unwrap();
        assert!((rss[0] - 11.0).abs() < 1e-10);
        for w in rss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn both_paths_agree_on_complete_rows() {
        let (x, y) = toy(14, 5);
        let m = fit(&x, &y, 3).unwrap();
        for i in 0..14 {
            let row = x.row_options(i);
            for h in 1..=3 {
                let a = m.predict(&row, h, PredictionMode::Regular).unwrap();
                let b = m.predict(&row, h, PredictionMode::MissingSpecific).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn predict_reproduces_training_fit() {
        let (x, y) = toy(10, 3);
        let m = fit(&x, &y, 3).unwrap();
        for h in 1..=3 {
            let fitted = m.fitted(h).unwrap();
            for i in 0..10 {
                let pred = m
                    .predict_scaled(&m.scaling.scale_row(&x.row_options(i)), h, PredictionMode::Regular)
                    .unwrap();
                assert!((pred - fitted[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn incomplete_training_rows_reproduce_through_missing_path() {
        let (x, y) = toy(12, 4);
        let x = apply_mask(&x, &[(0, 1), (3, 2), (7, 0), (9, 3)]).unwrap();
        let m = fit(&x, &y, 3).unwrap();
        let fitted = m.fitted(3).unwrap();
        for i in 0..12 {
            let pred = m
                .predict_scaled(&m.scaling.scale_row(&x.row_options(i)), 3, PredictionMode::MissingSpecific)
                .unwrap();
            assert!((pred - fitted[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn all_missing_row_is_rejected() {
        let (x, y) = toy(8, 3);
        let m = fit(&x, &y, 2).unwrap();
        assert_eq!(
            m.predict(&[None, None, None], 1, PredictionMode::MissingSpecific),
            Err(Error::AllMissingRow)
        );
        assert!(m.predict(&[Some(1.0), None, None], 3, PredictionMode::Regular).is_err());
    }

    #[test]
    fn component_count_is_validated() {
        let (x, y) = toy(5, 6);
        assert!(matches!(
            fit(&x, &y, 5),
            Err(Error::InvalidComponentCount { requested: 5, max: 4 })
        ));
        assert!(fit(&x, &y, 0).is_err());
    }

    #[test]
    fn exact_fit_stops_early() {
        // y is an exact linear function of a single direction: after one
        // component nothing is left to explain.
        let x = Matrix::from_fn(6, 3, |i, j| (i as f64 + 1.0) * [1.0, -2.0, 0.5][j] + if j == 2 { (i % 2) as f64 } else { 0.0 });
        let y: Vec<f64> = (0..6).map(|i| x.row(i).iter().sum::<f64>() * 0.0 + (i as f64 + 1.0)).collect();
        let mx = MaskedMatrix::complete(x).unwrap();
        let yr = ResponseVector::new(y).unwrap();
        let m = fit(&mx, &yr, 3).unwrap();
        let rss = rss_trace(&m, &yr).unwrap();
        assert!(*rss.last().unwrap() < 1e-10);
    }
}
