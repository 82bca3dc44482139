//! Degrees of freedom of a PLS1 fit.
//!
//! The unbiased estimate works on the Krylov structure of PLS: with
//! `D = X Xᵗ` (standardized `X`), orthonormal scores `T`,
//! `B = (t_aᵗ D^b y)_{a,b ≤ h}`, `c = B⁻¹ Tᵗ y` and `V = T B⁻ᵗ`, the fitted
//! values are `ŷ_h = Σ_j c_j D^j y` and
//!
//! ```text
//! DoF(h) = 1 + Σ_j c_j tr(D^j) − Σ_j c_j Σ_l t_lᵗ D^j t_l
//!            + (y − ŷ_h)ᵗ Σ_j D^j v_j + h
//! ```
//!
//! Powers of `D` are only ever applied to vectors (`D v = X (Xᵗ v)`); the
//! traces come from powers of the smaller Gram matrix. On incomplete data
//! only the naive count `h + 1` is available.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{MaskedMatrix, ResponseVector};
use crate::linalg::{dot, norm, Lu, Matrix};
use crate::plsr::PlsModel;
use crate::{Error, Result};

/// Column-equilibrated 1-norm condition number above which `B` counts as
/// singular.
pub const MAX_KRYLOV_CONDITION: f64 = 1e12;

/// Per-component degrees of freedom, `h = 0..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofEstimate {
    pub values: Vec<f64>,
    /// The raw estimate left `[1, min(n, p + 1)]` and was clipped.
    pub clipped: Vec<bool>,
    /// The estimate was unavailable and the naive count was used.
    pub naive_fallback: Vec<bool>,
}

impl DofEstimate {
    /// Naive counts `h + 1` for `h = 0..=h_max`.
    pub fn naive(h_max: usize) -> DofEstimate {
        DofEstimate {
            values: (0..=h_max).map(dof_naive).collect(),
            clipped: vec![false; h_max + 1],
            naive_fallback: vec![false; h_max + 1],
        }
    }

    pub fn get(&self, h: usize) -> f64 {
        self.values[h]
    }
}

/// `h + 1`: one parameter per component plus the intercept.
pub fn dof_naive(h: usize) -> f64 {
    (h + 1) as f64
}

/// Unbiased DoF with `h` components, clipped to `[1, min(n, p + 1)]`.
/// Returns `(value, clipped)`.
pub fn dof_estimate(x: &MaskedMatrix, y: &ResponseVector, model: &PlsModel, h: usize) -> Result<(f64, bool)> {
    let krylov = KrylovTerms::new(x, y, model, h)?;
    let raw = krylov.raw(h)?;
    Ok(clip(raw, x.rows(), x.cols()))
}

/// The estimate before clipping. PLS can spend more than `p + 1` degrees
/// of freedom, so this is the value to compare with a measured divergence.
pub fn dof_estimate_raw(x: &MaskedMatrix, y: &ResponseVector, model: &PlsModel, h: usize) -> Result<f64> {
    KrylovTerms::new(x, y, model, h)?.raw(h)
}

/// Estimates for every `h = 0..=h_max`, falling back to the naive count
/// wherever the Krylov basis is singular.
pub fn dof_trace(x: &MaskedMatrix, y: &ResponseVector, model: &PlsModel, h_max: usize) -> Result<DofEstimate> {
    let krylov = KrylovTerms::new(x, y, model, h_max)?;
    let mut out = DofEstimate::naive(h_max);
    for h in 1..=h_max {
        match krylov.raw(h) {
            Ok(raw) => {
                let (v, c) = clip(raw, x.rows(), x.cols());
                out.values[h] = v;
                out.clipped[h] = c;
            }
            Err(Error::SingularKrylovBasis(_)) => out.naive_fallback[h] = true,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn clip(raw: f64, n: usize, p: usize) -> (f64, bool) {
    let hi = n.min(p + 1) as f64;
    if !raw.is_finite() {
        return (hi, true);
    }
    if raw < 1.0 {
        (1.0, true)
    } else if raw > hi {
        (hi, true)
    } else {
        (raw, false)
    }
}

// Everything Eq.-style terms need, precomputed once for h_max.
struct KrylovTerms {
    y: Vec<f64>,
    // orthonormal scores
    t: Vec<Vec<f64>>,
    // krylov[j-1] = D^j y
    krylov: Vec<Vec<f64>>,
    // traces[j-1] = tr(D^j)
    traces: Vec<f64>,
    // tdt[j-1][l] = t_lᵗ D^j t_l
    tdt: Vec<Vec<f64>>,
    xs: Matrix,
    fitted: Vec<Vec<f64>>,
}

impl KrylovTerms {
    fn new(x: &MaskedMatrix, y: &ResponseVector, model: &PlsModel, h_max: usize) -> Result<KrylovTerms> {
        let xs_raw = x.to_complete().ok_or(Error::MissingCells)?;
        let (n, p) = (xs_raw.rows(), xs_raw.cols());
        if h_max > model.n_components() {
            return Err(Error::InvalidComponentCount {
                requested: h_max,
                max: model.n_components(),
            });
        }
        if y.len() != n || model.n_train() != n || model.n_features() != p {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        let s = &model.scaling;
        let xs = Matrix::from_fn(n, p, |i, j| (xs_raw[(i, j)] - s.means[j]) / s.sds[j]);
        let ys: Vec<f64> = y.as_slice().iter().map(|&v| s.scale_y(v)).collect();

        let t: Vec<Vec<f64>> = (0..h_max)
            .map(|l| {
                let col = model.scores.col(l);
                let nrm = norm(&col);
                col.into_iter().map(|v| v / nrm).collect()
            })
            .collect();

        let apply_d = |v: &[f64]| xs.mul_vec(&xs.tr_mul_vec(v));
        let mut krylov = Vec::with_capacity(h_max);
        let mut cur = ys.clone();
        for _ in 0..h_max {
            cur = apply_d(&cur);
            krylov.push(cur.clone());
        }

        let mut tdt = vec![vec![0.0; h_max]; h_max];
        for (l, tl) in t.iter().enumerate() {
            let mut cur = tl.clone();
            for row in tdt.iter_mut() {
                cur = apply_d(&cur);
                row[l] = dot(tl, &cur);
            }
        }

        let gram = if p <= n { xs.gram() } else { xs.transpose().gram() };
        let mut traces = Vec::with_capacity(h_max);
        let mut power = gram.clone();
        for j in 0..h_max {
            if j > 0 {
                power = power.matmul(&gram);
            }
            traces.push((0..power.rows()).map(|i| power[(i, i)]).sum());
        }

        let fitted = (0..=h_max).map(|h| model.fitted(h)).collect::<Result<Vec<_>>>()?;
        Ok(KrylovTerms {
            y: ys,
            t,
            krylov,
            traces,
            tdt,
            xs,
            fitted,
        })
    }

    fn apply_d(&self, v: &[f64]) -> Vec<f64> {
        self.xs.mul_vec(&self.xs.tr_mul_vec(v))
    }

    fn raw(&self, h: usize) -> Result<f64> {
        if h == 0 {
            return Ok(1.0);
        }
        let b = Matrix::from_fn(h, h, |a, c| dot(&self.t[a], &self.krylov[c]));
        let col_norms: Vec<f64> = (0..h).map(|c| norm(&b.col(c))).collect();
        if col_norms.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::SingularKrylovBasis(h));
        }
        let scaled = Matrix::from_fn(h, h, |a, c| b[(a, c)] / col_norms[c]);
        let lu = Lu::new(&scaled).ok_or(Error::SingularKrylovBasis(h))?;
        let scaled_inv = lu.inverse();
        if one_norm(&scaled) * one_norm(&scaled_inv) > MAX_KRYLOV_CONDITION {
            return Err(Error::SingularKrylovBasis(h));
        }
        // B⁻¹ = diag(1/col_norms) · scaled⁻¹
        let b_inv = Matrix::from_fn(h, h, |a, c| scaled_inv[(a, c)] / col_norms[a]);

        let ty: Vec<f64> = (0..h).map(|a| dot(&self.t[a], &self.y)).collect();
        let c = b_inv.mul_vec(&ty);

        let trace_term: f64 = (0..h).map(|j| c[j] * self.traces[j]).sum();
        let tkt: f64 = (0..h)
            .map(|j| c[j] * (0..h).map(|l| self.tdt[j][l]).sum::<f64>())
            .sum();

        // v_j = Σ_a t_a (B⁻¹)_{j a}
        let n = self.y.len();
        let mut r: Vec<f64> = self.y.iter().zip(&self.fitted[h]).map(|(a, b)| a - b).collect();
        let mut ykv = 0.0;
        for j in 0..h {
            r = self.apply_d(&r);
            let mut v = vec![0.0; n];
            for a in 0..h {
                let coef = b_inv[(j, a)];
                for (vi, ti) in v.iter_mut().zip(&self.t[a]) {
                    *vi += coef * ti;
                }
            }
            ykv += dot(&r, &v);
        }
        Ok(1.0 + trace_term - tkt + ykv + h as f64)
    }
}

fn one_norm(m: &Matrix) -> f64 {
    (0..m.cols())
        .map(|c| (0..m.rows()).map(|r| m[(r, c)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plsr::fit;

    #[test]
    fn naive_counts() {
        assert_eq!(dof_naive(0), 1.0);
        assert_eq!(dof_naive(4), 5.0);
        assert_eq!(dof_naive(8), 9.0);
    }

    #[test]
    fn clipping_bounds() {
        assert_eq!(clip(0.3, 20, 5), (1.0, true));
        assert_eq!(clip(7.5, 20, 5), (6.0, true));
        assert_eq!(clip(3.2, 20, 5), (3.2, false));
        assert_eq!(clip(f64::NAN, 4, 9), (4.0, true));
    }

    #[test]
    fn incomplete_data_is_rejected() {
        let x = MaskedMatrix::from_options(&[
            [Some(1.0), Some(2.0)],
            [Some(2.0), None],
            [Some(0.5), Some(1.0)],
            [Some(3.0), Some(-1.0)],
        ])
        .unwrap();
        let y = ResponseVector::new(vec![1.0, 2.0, 0.0, 3.0]).unwrap();
        let m = fit(&x, &y, 1).unwrap();
        assert_eq!(dof_estimate(&x, &y, &m, 1), Err(Error::MissingCells));
    }

    #[test]
    fn zero_components_is_one() {
        let x = MaskedMatrix::complete(Matrix::from_fn(6, 2, |i, j| ((i + 1) * (j + 2)) as f64 + (i * i) as f64 * (j as f64))).unwrap();
        let y = ResponseVector::new(vec![1.0, 3.0, 2.0, 5.0, 4.0, 7.0]).unwrap();
        let m = fit(&x, &y, 2).unwrap();
        let trace = dof_trace(&x, &y, &m, 2).unwrap();
        assert_eq!(trace.values[0], 1.0);
    }
}
