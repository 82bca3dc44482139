use alloc::vec::Vec;

use super::{column_means, ImputeMethod, ImputedSet};
use crate::data::MaskedMatrix;
use crate::{Error, Result};

pub const DEFAULT_NEIGHBOURS: usize = 5;

/// k-nearest-neighbour imputation under Gower distance.
///
/// The distance between two rows is the mean of `|x_a − x'_a| / range_a`
/// over their mutually observed columns, with `range_a` taken over the
/// observed cells of the whole matrix. A masked cell `(i, j)` gets the
/// unweighted mean of the `k` closest rows that observe column `j` (ties by
/// row index). Rows sharing no observed column with row `i` are not
/// candidates; without any candidate the column mean is used.
pub fn impute_knn(x: &MaskedMatrix, k: usize) -> Result<ImputedSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1"));
    }
    let (n, p) = (x.rows(), x.cols());
    let ranges: Vec<f64> = (0..p)
        .map(|j| {
            let (lo, hi) = (0..n)
                .filter_map(|i| x.get(i, j))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect();
    let means = column_means(x);
    let mut out = x.values().clone();
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        if x.row_is_complete(i) {
            continue;
        }
        dist.clear();
        for other in (0..n).filter(|&o| o != i) {
            if let Some(d) = gower(x, &ranges, i, other) {
                dist.push((d, other));
            }
        }
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for j in (0..p).filter(|&j| !x.is_observed(i, j)) {
            let donors: Vec<f64> = dist.iter().filter_map(|&(_, o)| x.get(o, j)).take(k).collect();
            out[(i, j)] = if donors.is_empty() {
                means[j]
            } else {
                donors.iter().sum::<f64>() / donors.len() as f64
            };
        }
    }
    Ok(ImputedSet {
        datasets: alloc::vec![out],
        method: ImputeMethod::Knn,
        seed: None,
        iterations: 0,
        converged: true,
    })
}

fn gower(x: &MaskedMatrix, ranges: &[f64], a: usize, b: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (j, &r) in ranges.iter().enumerate() {
        if let (Some(u), Some(v)) = (x.get(a, j), x.get(b, j)) {
            if r > 0.0 {
                sum += (u - v).abs() / r;
            }
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}
