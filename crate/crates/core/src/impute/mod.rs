//! Imputation of masked cells: chained-equations multiple imputation with a
//! Bayesian normal linear model, k-nearest neighbours under Gower distance,
//! and iterative truncated SVD. Observed cells are never touched.

use alloc::vec::Vec;

use crate::data::MaskedMatrix;
use crate::linalg::Matrix;
use crate::math;

mod knn;
mod mice;
mod svd;

pub use knn::{impute_knn, DEFAULT_NEIGHBOURS};
pub use mice::{impute_mice_norm, DEFAULT_CYCLES};
pub use svd::{choose_svd_rank, impute_svd, DEFAULT_SVD_MAX_ITER, DEFAULT_SVD_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImputeMethod {
    MiceNorm,
    Knn,
    Svd,
}

impl ImputeMethod {
    pub fn name(self) -> &'static str {
        match self {
            ImputeMethod::MiceNorm => "mice_norm",
            ImputeMethod::Knn => "knn",
            ImputeMethod::Svd => "svd",
        }
    }
}

/// `m` completed copies of one masked matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedSet {
    pub datasets: Vec<Matrix>,
    pub method: ImputeMethod,
    /// Seed of the generator the set was drawn from, for stochastic methods.
    pub seed: Option<u64>,
    /// Iterations run (SVD) or cycles per chain (MICE); 0 when nothing was
    /// masked.
    pub iterations: usize,
    /// False if the iterative SVD hit its iteration cap.
    pub converged: bool,
}

impl ImputedSet {
    pub fn m(&self) -> usize {
        self.datasets.len()
    }
}

/// Number of imputations for a missing proportion `d`: the percentage of
/// missing cells, rounded up, and at least one.
pub fn imputations_for_proportion(d: f64) -> usize {
    // 1e-9 keeps 0.07 * 100 = 7.000000000000001 at 7
    (math::ceil(100.0 * d - 1e-9) as usize).max(1)
}

/// Most frequent count; ties go to the smallest. `None` for an empty slice.
pub fn pool_component_mode(counts: &[usize]) -> Option<usize> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let run = sorted[i..].iter().take_while(|&&w| w == v).count();
        if best.is_none_or(|(_, c)| run > c) {
            best = Some((v, run));
        }
        i += run;
    }
    best.map(|(v, _)| v)
}

/// Copy of the values with masked cells set to their column's observed mean.
pub(crate) fn mean_filled(x: &MaskedMatrix) -> Matrix {
    let means = column_means(x);
    Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j).unwrap_or(means[j]))
}

pub(crate) fn column_means(x: &MaskedMatrix) -> Vec<f64> {
    (0..x.cols())
        .map(|j| {
            let (s, c) = (0..x.rows())
                .filter_map(|i| x.get(i, j))
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            s / c as f64
        })
        .collect()
}

pub(crate) fn masked_cells(x: &MaskedMatrix) -> Vec<(usize, usize)> {
    (0..x.rows())
        .flat_map(|i| (0..x.cols()).map(move |j| (i, j)))
        .filter(|&(i, j)| !x.is_observed(i, j))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_pooling() {
        assert_eq!(pool_component_mode(&[2, 2, 3]), Some(2));
        assert_eq!(pool_component_mode(&[4]), Some(4));
        assert_eq!(pool_component_mode(&[2, 3, 3, 2]), Some(2));
        assert_eq!(pool_component_mode(&[5, 1, 5, 1, 1]), Some(1));
        assert_eq!(pool_component_mode(&[]), None);
    }

    #[test]
    fn imputation_counts() {
        assert_eq!(imputations_for_proportion(0.05), 5);
        assert_eq!(imputations_for_proportion(0.20), 20);
        assert_eq!(imputations_for_proportion(0.50), 50);
        assert_eq!(imputations_for_proportion(0.125), 13);
        assert_eq!(imputations_for_proportion(0.07), 7);
        assert_eq!(imputations_for_proportion(0.0), 1);
        for pct in 1..=50 {
            assert_eq!(imputations_for_proportion(pct as f64 / 100.0), pct);
        }
    }

    #[test]
    fn mean_fill() {
        let x = MaskedMatrix::from_options(&[
            [Some(1.0), Some(2.0)],
            [None, Some(4.0)],
            [Some(3.0), None],
            [Some(5.0), Some(6.0)],
        ])
        .unwrap();
        let f = mean_filled(&x);
        assert_eq!(f[(1, 0)], 3.0);
        assert_eq!(f[(2, 1)], 4.0);
        assert_eq!(masked_cells(&x), alloc::vec![(1, 0), (2, 1)]);
    }
}
