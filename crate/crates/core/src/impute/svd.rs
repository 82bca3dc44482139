use alloc::vec::Vec;

use super::{masked_cells, mean_filled, ImputeMethod, ImputedSet};
use crate::data::MaskedMatrix;
use crate::linalg::TruncatedSvd;
use crate::math;
use crate::{Error, Result};

pub const DEFAULT_SVD_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_SVD_MAX_ITER: usize = 100;

/// Iterative rank-`k` SVD imputation.
///
/// Masked cells start at their column means and are repeatedly replaced by
/// the rank-`k` reconstruction of the filled matrix, until the relative
/// Frobenius change of the imputed cells drops below `tol`. Hitting
/// `max_iter` returns the last iterate with `converged = false`.
pub fn impute_svd(x: &MaskedMatrix, k: usize, tol: f64, max_iter: usize) -> Result<ImputedSet> {
    let max = x.rows().min(x.cols());
    if k == 0 || k >= max {
        return Err(Error::InvalidRank { k, max: max - 1 });
    }
    let holes = masked_cells(x);
    let mut filled = mean_filled(x);
    let mut iterations = 0;
    let mut converged = true;
    if !holes.is_empty() {
        converged = false;
        while iterations < max_iter {
            iterations += 1;
            let recon = TruncatedSvd::new(&filled, k).reconstruct();
            let mut change = 0.0;
            let mut size = 0.0;
            for &(i, j) in &holes {
                let old = filled[(i, j)];
                let new = recon[(i, j)];
                change += (new - old) * (new - old);
                size += old * old;
                filled[(i, j)] = new;
            }
            if math::sqrt(change) <= tol * math::sqrt(size).max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }
    Ok(ImputedSet {
        datasets: alloc::vec![filled],
        method: ImputeMethod::Svd,
        seed: None,
        iterations,
        converged,
    })
}

/// Rank at the elbow of the singular values of the mean-filled,
/// column-centred matrix: the `k ≤ min(n, p) − 1` with the largest drop
/// `σ_k / σ_{k+1}`, provided that drop exceeds 2. Values below `1e-10 σ_1`
/// count as zero (an infinite drop). Without such a drop, 1.
pub fn choose_svd_rank(x: &MaskedMatrix) -> usize {
    let mut filled = mean_filled(x);
    let (n, p) = (filled.rows(), filled.cols());
    for j in 0..p {
        let m = filled.col(j).iter().sum::<f64>() / n as f64;
        for i in 0..n {
            filled[(i, j)] -= m;
        }
    }
    let s: Vec<f64> = TruncatedSvd::singular_values_of(&filled);
    let floor = s.first().copied().unwrap_or(0.0) * 1e-6;
    let cap = n.min(p).saturating_sub(1).max(1);
    let mut best = (1, 2.0);
    for k in 1..=cap.min(s.len().saturating_sub(1)) {
        if s[k - 1] <= floor {
            break;
        }
        let ratio = if s[k] <= floor { f64::INFINITY } else { s[k - 1] / s[k] };
        if ratio > best.1 {
            best = (k, ratio);
        }
        if ratio.is_infinite() {
            break;
        }
    }
    best.0
}
