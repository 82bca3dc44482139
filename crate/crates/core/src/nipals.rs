//! NIPALS principal components on complete and incomplete matrices.
//!
//! Components are extracted one at a time by alternating ratios between the
//! score `t_h` and the unit-norm loading `q_h`, then the working matrix is
//! deflated by `t_h q_hᵗ`. On incomplete data every sum runs over observed
//! cells only and deflation touches observed cells only.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::MaskedMatrix;
use crate::error::Axis;
use crate::linalg::{dot, norm, Matrix};
use crate::math;
use crate::{Error, Result};

/// Relative change of `t_h` between inner iterations that counts as converged.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NipalsOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for NipalsOptions {
    fn default() -> Self {
        NipalsOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Scores (`n × H`), unit-norm loadings (`p × H`) and per-component
/// convergence diagnostics.
///
/// Signs are canonical: the largest-magnitude entry of every loading is
/// positive.
#[derive(Debug, Clone)]
pub struct NipalsFactors {
    pub scores: Matrix,
    pub loadings: Matrix,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl NipalsFactors {
    pub fn n_components(&self) -> usize {
        self.scores.cols()
    }

    /// `Err(NoConvergence(h))` for the first component that hit the
    /// iteration cap. The factors themselves are still usable.
    pub fn ensure_converged(&self) -> Result<()> {
        match self.converged.iter().position(|c| !c) {
            Some(h) => Err(Error::NoConvergence(h + 1)),
            None => Ok(()),
        }
    }
}

fn check_h(x: &MaskedMatrix, h: usize) -> Result<()> {
    let max = x.rows().min(x.cols());
    if h == 0 || h > max {
        return Err(Error::InvalidComponentCount { requested: h, max });
    }
    Ok(())
}

/// NIPALS on a fully observed matrix.
pub fn nipals_complete(x: &MaskedMatrix, h: usize) -> Result<NipalsFactors> {
    nipals_complete_with(x, h, NipalsOptions::default())
}

pub fn nipals_complete_with(x: &MaskedMatrix, h: usize, opts: NipalsOptions) -> Result<NipalsFactors> {
    check_h(x, h)?;
    let mut resid = x.to_complete().ok_or(Error::MissingCells)?;
    let (n, p) = (resid.rows(), resid.cols());
    let mut scores = Matrix::zeros(n, h);
    let mut loadings = Matrix::zeros(p, h);
    let mut converged = Vec::with_capacity(h);
    let mut iterations = Vec::with_capacity(h);

    for comp in 0..h {
        let mut t = initial_column(&resid);
        let mut q = vec![0.0; p];
        let mut done = false;
        let mut iter = 0;
        while iter < opts.max_iter {
            iter += 1;
            let tt = dot(&t, &t);
            if tt <= 0.0 {
                return Err(Error::ComponentDegenerate(comp + 1));
            }
            q = resid.tr_mul_vec(&t);
            q.iter_mut().for_each(|v| *v /= tt);
            let qn = norm(&q);
            if qn <= 0.0 {
                return Err(Error::ComponentDegenerate(comp + 1));
            }
            q.iter_mut().for_each(|v| *v /= qn);
            let t_new = resid.mul_vec(&q);
            let change = relative_change(&t, &t_new);
            t = t_new;
            if change < opts.tolerance {
                done = true;
                break;
            }
        }
        canonicalize(&mut t, &mut q);
        deflate_complete(&mut resid, &t, &q);
        scores.set_col(comp, &t);
        loadings.set_col(comp, &q);
        converged.push(done);
        iterations.push(iter);
    }
    Ok(NipalsFactors {
        scores,
        loadings,
        converged,
        iterations,
    })
}

/// NIPALS on a matrix with masked cells.
///
/// `q_hj` uses the rows where both `x_ij` and `t_hi` are available, `t_hi`
/// the columns observed in row `i`. The initial `t_h` is the first column
/// of the working matrix and is undefined where that column is masked.
pub fn nipals_incomplete(x: &MaskedMatrix, h: usize) -> Result<NipalsFactors> {
    nipals_incomplete_with(x, h, NipalsOptions::default())
}

pub fn nipals_incomplete_with(x: &MaskedMatrix, h: usize, opts: NipalsOptions) -> Result<NipalsFactors> {
    check_h(x, h)?;
    let (n, p) = (x.rows(), x.cols());
    let mask = x.mask();
    let mut resid = x.values().clone();
    let mut scores = Matrix::zeros(n, h);
    let mut loadings = Matrix::zeros(p, h);
    let mut converged = Vec::with_capacity(h);
    let mut iterations = Vec::with_capacity(h);

    for comp in 0..h {
        let start = first_usable_column(&resid, mask, p);
        let mut t: Vec<Option<f64>> = (0..n)
            .map(|i| mask[i * p + start].then(|| resid[(i, start)]))
            .collect();
        let mut q = vec![0.0; p];
        let mut done = false;
        let mut iter = 0;
        while iter < opts.max_iter {
            iter += 1;
            for j in 0..p {
                let (mut num, mut den, mut any) = (0.0, 0.0, false);
                for i in 0..n {
                    if let (true, Some(ti)) = (mask[i * p + j], t[i]) {
                        num += resid[(i, j)] * ti;
                        den += ti * ti;
                        any = true;
                    }
                }
                if !any || den <= 0.0 {
                    return Err(Error::EmptyIndexSet {
                        axis: Axis::Column,
                        index: j,
                        component: comp + 1,
                    });
                }
                q[j] = num / den;
            }
            let qn = norm(&q);
            if qn <= 0.0 {
                return Err(Error::ComponentDegenerate(comp + 1));
            }
            q.iter_mut().for_each(|v| *v /= qn);

            let mut t_new = vec![0.0; n];
            for (i, ti) in t_new.iter_mut().enumerate() {
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..p {
                    if mask[i * p + j] {
                        num += resid[(i, j)] * q[j];
                        den += q[j] * q[j];
                    }
                }
                if den <= 0.0 {
                    return Err(Error::EmptyIndexSet {
                        axis: Axis::Row,
                        index: i,
                        component: comp + 1,
                    });
                }
                *ti = num / den;
            }
            let change = match t.iter().all(Option::is_some) {
                true => {
                    let old: Vec<f64> = t.iter().map(|v| v.unwrap()).collect();
                    relative_change(&old, &t_new)
                }
                false => f64::INFINITY,
            };
            t = t_new.into_iter().map(Some).collect();
            if change < opts.tolerance {
                done = true;
                break;
            }
        }
        let mut t: Vec<f64> = t.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        canonicalize(&mut t, &mut q);
        for i in 0..n {
            for j in 0..p {
                if mask[i * p + j] {
                    resid[(i, j)] -= t[i] * q[j];
                }
            }
        }
        scores.set_col(comp, &t);
        loadings.set_col(comp, &q);
        converged.push(done);
        iterations.push(iter);
    }
    Ok(NipalsFactors {
        scores,
        loadings,
        converged,
        iterations,
    })
}

/// Rank-`h` reconstruction `x̂_ij = Σ_{l≤h} t_li q_lj`.
pub fn reconstruct(factors: &NipalsFactors, h: usize) -> Result<Matrix> {
    let max = factors.n_components();
    if h == 0 || h > max {
        return Err(Error::InvalidComponentCount { requested: h, max });
    }
    let (n, p) = (factors.scores.rows(), factors.loadings.rows());
    Ok(Matrix::from_fn(n, p, |i, j| {
        (0..h)
            .map(|l| factors.scores[(i, l)] * factors.loadings[(j, l)])
            .sum()
    }))
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    let diff = math::sqrt(old.iter().zip(new).map(|(a, b)| (a - b) * (a - b)).sum());
    let scale = norm(new);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

// The first column, unless it carries no signal left after deflation, in
// which case the column with the largest norm.
fn initial_column(resid: &Matrix) -> Vec<f64> {
    let first = resid.col(0);
    let scale = resid.frobenius_norm();
    if norm(&first) > 1e-12 * scale {
        return first;
    }
    let best = (0..resid.cols())
        .max_by(|&a, &b| norm(&resid.col(a)).total_cmp(&norm(&resid.col(b))))
        .unwrap_or(0);
    resid.col(best)
}

fn first_usable_column(resid: &Matrix, mask: &[bool], p: usize) -> usize {
    let n = resid.rows();
    let col_norm = |j: usize| {
        math::sqrt(
            (0..n)
                .filter(|&i| mask[i * p + j])
                .map(|i| resid[(i, j)] * resid[(i, j)])
                .sum(),
        )
    };
    let total = math::sqrt((0..p).map(|j| col_norm(j) * col_norm(j)).sum());
    match (0..p).find(|&j| (0..n).any(|i| mask[i * p + j])) {
        Some(j) if col_norm(j) > 1e-12 * total => j,
        _ => (0..p).max_by(|&a, &b| col_norm(a).total_cmp(&col_norm(b))).unwrap_or(0),
    }
}

fn canonicalize(t: &mut [f64], q: &mut [f64]) {
    let big = q
        .iter()
        .copied()
        .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    if big < 0.0 {
        t.iter_mut().for_each(|v| *v = -*v);
        q.iter_mut().for_each(|v| *v = -*v);
    }
}

fn deflate_complete(resid: &mut Matrix, t: &[f64], q: &[f64]) {
    for (i, &ti) in t.iter().enumerate() {
        for (r, &qj) in resid.row_mut(i).iter_mut().zip(q) {
            *r -= ti * qj;
        }
    }
}
