use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::{mean_filled, ImputeMethod, ImputedSet};
use crate::data::MaskedMatrix;
use crate::linalg::{cholesky, cholesky_solve, solve_lower_transpose, Matrix};
use crate::math;
use crate::rng::SeededRng;
use crate::{Error, Result};

pub const DEFAULT_CYCLES: usize = 5;

const RIDGE: f64 = 1e-6;

/// Multiple imputation by chained equations with the Bayesian normal linear
/// model.
///
/// Each of the `m` chains starts from column-mean fills and runs `cycles`
/// sweeps over the incomplete columns. In a sweep, column `j` is regressed
/// (with intercept) on the current values of the other columns over its
/// observed rows; `σ²` is drawn from its scaled inverse-χ² posterior, `β`
/// from `N(β̂, σ² (XᵗX)⁻¹)`, and the masked cells of `j` from the predictive
/// `N(x β, σ²)`. When a column has too few observed rows for all predictors,
/// the predictors least correlated with it are dropped so that at least one
/// residual degree of freedom remains. A singular `XᵗX` is ridged by
/// `1e-6 · tr(XᵗX)`.
///
/// Chain `c` draws from `rng.substream(100 + c)`, so chains are independent
/// of each other and of scheduling order.
pub fn impute_mice_norm(x: &MaskedMatrix, m: usize, cycles: usize, rng: &SeededRng) -> Result<ImputedSet> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1"));
    }
    let incomplete: Vec<usize> = (0..x.cols()).filter(|&j| x.observed_in_col(j) < x.rows()).collect();
    let datasets = (0..m)
        .map(|c| {
            let mut chain_rng = rng.substream(100 + c as u64);
            run_chain(x, &incomplete, cycles, &mut chain_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImputedSet {
        datasets,
        method: ImputeMethod::MiceNorm,
        seed: Some(rng.seed()),
        iterations: if incomplete.is_empty() { 0 } else { cycles },
        converged: true,
    })
}

fn run_chain(x: &MaskedMatrix, incomplete: &[usize], cycles: usize, rng: &mut SeededRng) -> Result<Matrix> {
    let mut filled = mean_filled(x);
    if incomplete.is_empty() {
        return Ok(filled);
    }
    for _ in 0..cycles {
        for &j in incomplete {
            draw_column(x, &mut filled, j, rng)?;
        }
    }
    Ok(filled)
}

fn draw_column(x: &MaskedMatrix, filled: &mut Matrix, j: usize, rng: &mut SeededRng) -> Result<()> {
    let n = x.rows();
    let obs: Vec<usize> = (0..n).filter(|&i| x.is_observed(i, j)).collect();
    let mis: Vec<usize> = (0..n).filter(|&i| !x.is_observed(i, j)).collect();
    let predictors = choose_predictors(filled, j, &obs);
    let q = predictors.len() + 1;
    let design = |i: usize, c: usize| if c == 0 { 1.0 } else { filled[(i, predictors[c - 1])] };

    let mut xtx = Matrix::zeros(q, q);
    let mut xty = vec![0.0; q];
    for &i in &obs {
        let yi = filled[(i, j)];
        for a in 0..q {
            let da = design(i, a);
            xty[a] += da * yi;
            for b in 0..=a {
                xtx[(a, b)] += da * design(i, b);
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    let l = match cholesky(&xtx) {
        Some(l) => l,
        None => {
            let trace: f64 = (0..q).map(|a| xtx[(a, a)]).sum();
            let penalty = RIDGE * trace.max(1.0);
            for a in 0..q {
                xtx[(a, a)] += penalty;
            }
            cholesky(&xtx).ok_or(Error::InvalidArgument("regression design is not positive definite"))?
        }
    };
    let beta_hat = cholesky_solve(&l, &xty);
    let rss: f64 = obs
        .iter()
        .map(|&i| {
            let fit: f64 = (0..q).map(|c| design(i, c) * beta_hat[c]).sum();
            let r = filled[(i, j)] - fit;
            r * r
        })
        .sum();
    let df = (obs.len() - q) as f64;
    let chi: f64 = ChiSquared::new(df)
        .map_err(|_| Error::InvalidArgument("no residual degrees of freedom"))?
        .sample(rng);
    let sigma = math::sqrt(rss / chi.max(f64::MIN_POSITIVE));
    let z: Vec<f64> = (0..q).map(|_| StandardNormal.sample(rng)).collect();
    let dev = solve_lower_transpose(&l, &z);
    let beta: Vec<f64> = beta_hat.iter().zip(&dev).map(|(b, d)| b + sigma * d).collect();

    let draws: Vec<f64> = mis
        .iter()
        .map(|&i| {
            let mean: f64 = (0..q).map(|c| design(i, c) * beta[c]).sum();
            let e: f64 = StandardNormal.sample(rng);
            mean + sigma * e
        })
        .collect();
    for (&i, v) in mis.iter().zip(draws) {
        filled[(i, j)] = v;
    }
    Ok(())
}

// Keeps at most obs − 2 predictors, preferring those most correlated with
// column j over its observed rows; ties keep the lower column index.
fn choose_predictors(filled: &Matrix, j: usize, obs: &[usize]) -> Vec<usize> {
    let p = filled.cols();
    let limit = obs.len().saturating_sub(2);
    let mut all: Vec<usize> = (0..p).filter(|&c| c != j).collect();
    if all.len() <= limit {
        return all;
    }
    let target: Vec<f64> = obs.iter().map(|&i| filled[(i, j)]).collect();
    let mut scored: Vec<(f64, usize)> = all
        .drain(..)
        .map(|c| {
            let col: Vec<f64> = obs.iter().map(|&i| filled[(i, c)]).collect();
            (abs_correlation(&target, &col), c)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = scored.into_iter().take(limit).map(|(_, c)| c).collect();
    keep.sort_unstable();
    keep
}

fn abs_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let d = math::sqrt(saa * sbb);
    if d > 0.0 {
        (sab / d).abs()
    } else {
        0.0
    }
}
