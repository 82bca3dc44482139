//! Reference data with a known number of components, MCAR / MAR hole
//! punching, and the replicate pipeline
//! `generate → punch → impute → fit → select`.
//!
//! Every replicate draws from its own seed, derived from the master seed and
//! the cell coordinates (shape, true count, mechanism, proportion, replicate
//! index) but not from the method, so all methods see identical datasets.
//! Sub-streams of that seed are fixed per stage: generation 0, punching 1,
//! imputation 2, cross-validation 3.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{apply_mask, MaskedMatrix, ResponseVector};
use crate::impute::{
    impute_knn, impute_mice_norm, impute_svd, imputations_for_proportion, pool_component_mode, DEFAULT_CYCLES,
    DEFAULT_NEIGHBOURS, DEFAULT_SVD_MAX_ITER, DEFAULT_SVD_TOLERANCE,
};
use crate::linalg::{orthonormalize_columns, Matrix};
use crate::math;
use crate::rng::{mix64, SeededRng};
use crate::selection::{evaluate, Criterion, CriterionTrace, CvMode, SelectionSettings, DEFAULT_FOLDS};
use crate::{Error, Result};

/// The five `(n, p)` set-ups, from vertical to horizontal.
pub const SHAPES: [(usize, usize); 5] = [(100, 20), (80, 25), (60, 33), (40, 50), (20, 100)];

/// Missing proportions 5%, 10%, …, 50%.
pub const PROPORTIONS: [f64; 10] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50];

pub const TRUE_COMPONENTS: [usize; 3] = [2, 4, 6];

/// Largest component count fitted in the simulations.
pub const H_MAX: usize = 8;

/// Noise standard deviation of the response, calibrated so that Q²-LOO
/// recovers the true count on complete data.
pub const DEFAULT_NOISE: f64 = 0.35;

/// Noise standard deviation of the predictors.
pub const DEFAULT_X_NOISE: f64 = 0.03;

/// Amplitude ratio between successive latent directions of `X`.
pub const DEFAULT_DECAY: f64 = 0.5;

pub const MAX_PUNCH_ATTEMPTS: usize = 100;

pub const DEFAULT_MAR_SLOPE: f64 = 1.0;

const STREAM_GENERATE: u64 = 0;
const STREAM_PUNCH: u64 = 1;
const STREAM_IMPUTE: u64 = 2;
const STREAM_CV: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Mcar,
    Mar,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
        }
    }

    pub fn from_name(s: &str) -> Option<Mechanism> {
        match s {
            "mcar" => Some(Mechanism::Mcar),
            "mar" => Some(Mechanism::Mar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    /// Target proportion of masked cells, in `[0, 0.5]`.
    pub d: f64,
    /// MAR only: column that stays observed and drives missingness.
    pub driver: usize,
    /// MAR only: slope on the standardized driver value.
    pub slope: f64,
}

impl MissingnessSpec {
    pub fn mcar(d: f64) -> Self {
        MissingnessSpec {
            mechanism: Mechanism::Mcar,
            d,
            driver: 0,
            slope: DEFAULT_MAR_SLOPE,
        }
    }

    pub fn mar(d: f64) -> Self {
        MissingnessSpec {
            mechanism: Mechanism::Mar,
            ..MissingnessSpec::mcar(d)
        }
    }
}

/// Shape and structure of one reference dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub true_h: usize,
    /// Noise standard deviation of `y` before standardization.
    pub noise: f64,
    /// Noise standard deviation of `X`.
    pub x_noise: f64,
    /// Amplitude ratio between successive latent directions of `X`.
    pub decay: f64,
}

impl SimSpec {
    pub fn new(n: usize, p: usize, true_h: usize) -> Self {
        SimSpec {
            n,
            p,
            true_h,
            noise: DEFAULT_NOISE,
            x_noise: DEFAULT_X_NOISE,
            decay: DEFAULT_DECAY,
        }
    }
}

/// How each replicate's incomplete data is handled before selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    NipalsDirect,
    Mice,
    Knn,
    Svd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::NipalsDirect, Method::Mice, Method::Knn, Method::Svd];

    pub fn name(self) -> &'static str {
        match self {
            Method::NipalsDirect => "nipals",
            Method::Mice => "mice",
            Method::Knn => "knn",
            Method::Svd => "svd",
        }
    }

    pub fn from_name(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Tuning of the replicate pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    pub h_max: usize,
    pub folds: usize,
    pub cv_mode: CvMode,
    pub mice_cycles: usize,
    pub knn_neighbours: usize,
    /// `None` uses the true component count.
    pub svd_rank: Option<usize>,
    pub svd_tolerance: f64,
    pub svd_max_iter: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            h_max: H_MAX,
            folds: DEFAULT_FOLDS,
            cv_mode: CvMode::Standard,
            mice_cycles: DEFAULT_CYCLES,
            knn_neighbours: DEFAULT_NEIGHBOURS,
            svd_rank: None,
            svd_tolerance: DEFAULT_SVD_TOLERANCE,
            svd_max_iter: DEFAULT_SVD_MAX_ITER,
        }
    }
}

/// Coordinates of one grid cell, excluding the method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub spec: SimSpec,
    pub missing: MissingnessSpec,
}

impl Cell {
    /// Seed of replicate `replicate` in this cell.
    pub fn replicate_seed(&self, master: u64, replicate: usize) -> u64 {
        let parts = [
            self.spec.n as u64,
            self.spec.p as u64,
            self.spec.true_h as u64,
            self.missing.mechanism as u64,
            self.missing.d.to_bits(),
            replicate as u64,
        ];
        parts.iter().fold(mix64(master), |acc, &v| mix64(acc ^ mix64(v)))
    }
}

/// Elapsed-time source for the pipeline. The core crate has no clock.
pub trait Clock {
    /// Seconds since an arbitrary origin.
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// One selected component count (or failure) for a method × criterion on
/// one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub method: Method,
    pub criterion: Criterion,
    pub mechanism: Mechanism,
    pub d: f64,
    pub n: usize,
    pub p: usize,
    pub true_h: usize,
    pub replicate: usize,
    pub seed: u64,
    pub realized_d: f64,
    pub selected_h: Option<usize>,
    /// Number of imputed datasets pooled (1 unless MICE).
    pub m: usize,
    pub dof_fallback: bool,
    pub error: Option<Error>,
    /// Wall time of the method on this replicate, shared by its criteria.
    pub elapsed_seconds: f64,
}

impl ReplicateResult {
    pub fn is_correct(&self) -> bool {
        self.selected_h == Some(self.true_h)
    }
}

/// Draws a reference dataset.
///
/// Latent scores `S` (n × h) are standard normal, centred and
/// orthonormalized, then scaled to unit variance; loadings `P` (p × h) have
/// orthonormal columns. With strengths `s_k = √p · decay^(k−1)`,
/// `X = S diag(s) Pᵗ + x_noise · E` and `y = S 1 + noise · e`, and `y` is then
/// standardized.
pub fn gen_reference(spec: &SimSpec, rng: &mut SeededRng) -> Result<(MaskedMatrix, ResponseVector)> {
    let SimSpec {
        n,
        p,
        true_h: h,
        noise,
        x_noise,
        decay,
    } = *spec;
    if h == 0 || h > n.min(p) || n < 3 {
        return Err(Error::InvalidArgument("true component count must be in 1..=min(n, p)"));
    }
    if !(noise >= 0.0 && x_noise >= 0.0 && decay > 0.0) {
        return Err(Error::InvalidArgument("noise levels must be non-negative and decay positive"));
    }
    let mut scores = Matrix::from_fn(n, h, |_, _| StandardNormal.sample(rng));
    for k in 0..h {
        let col = scores.col(k);
        let mean = col.iter().sum::<f64>() / n as f64;
        scores.set_col(k, &col.iter().map(|v| v - mean).collect::<Vec<_>>());
    }
    let mut loadings = Matrix::from_fn(p, h, |_, _| StandardNormal.sample(rng));
    if !orthonormalize_columns(&mut scores) || !orthonormalize_columns(&mut loadings) {
        return Err(Error::CannotSatisfyInvariants);
    }
    let unit = math::sqrt((n - 1) as f64);
    let root_p = math::sqrt(p as f64);
    let mut strength = vec![0.0; h];
    let mut s = root_p;
    for v in strength.iter_mut() {
        *v = s;
        s *= decay;
    }
    let x = Matrix::from_fn(n, p, |i, j| {
        (0..h).map(|k| unit * scores[(i, k)] * strength[k] * loadings[(j, k)]).sum::<f64>()
    });
    let mut x = x;
    for v in x.as_mut_slice() {
        let e: f64 = StandardNormal.sample(rng);
        *v += x_noise * e;
    }
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(rng);
            (0..h).map(|k| unit * scores[(i, k)]).sum::<f64>() + noise * e
        })
        .collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = math::sqrt(y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64);
    for v in y.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok((MaskedMatrix::complete(x)?, ResponseVector::new(y)?))
}

fn check_proportion(d: f64) -> Result<()> {
    if (0.0..=0.5).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidProportion(d))
    }
}

/// Masks exactly `round(d · n · p)` cells chosen uniformly without
/// replacement, redrawing when a row or column would break the invariants.
pub fn punch_mcar(x: &MaskedMatrix, d: f64, rng: &mut SeededRng) -> Result<MaskedMatrix> {
    check_proportion(d)?;
    let (n, p) = (x.rows(), x.cols());
    let count = math::round(d * (n * p) as f64) as usize;
    for _ in 0..MAX_PUNCH_ATTEMPTS {
        let holes: Vec<(usize, usize)> = sample(rng, n * p, count).into_iter().map(|c| (c / p, c % p)).collect();
        match apply_mask(x, &holes) {
            Ok(m) => return Ok(m),
            Err(Error::EmptyRowProduced(_) | Error::ColumnTooSparse(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::CannotSatisfyInvariants)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + math::exp(-z))
}

/// MAR intercept `α` such that the expected number of masked cells,
/// `(p − 1) Σ_i logistic(α + β z_i)`, equals `target`.
pub fn calibrate_mar_intercept(z: &[f64], slope: f64, cols: usize, target: f64) -> Result<f64> {
    let expected = |a: f64| cols as f64 * z.iter().map(|&v| logistic(a + slope * v)).sum::<f64>();
    let max = (cols * z.len()) as f64;
    if !(target >= 0.0 && target < max) {
        return Err(Error::CalibrationFailure);
    }
    if target == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (mut lo, mut hi) = (-60.0, 60.0);
    if expected(lo) > target || expected(hi) < target {
        return Err(Error::CalibrationFailure);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// MAR hole punching. The driver column stays fully observed; every other
/// cell `(i, j)` is masked independently with probability
/// `logistic(α + β z_i)`, where `z` is the standardized driver column and `α`
/// makes the expected number of masked cells `d · n · p`.
pub fn punch_mar(x: &MaskedMatrix, spec: &MissingnessSpec, rng: &mut SeededRng) -> Result<MaskedMatrix> {
    check_proportion(spec.d)?;
    let (n, p) = (x.rows(), x.cols());
    if p < 2 {
        return Err(Error::InvalidArgument("MAR needs at least two columns"));
    }
    if spec.driver >= p {
        return Err(Error::OutOfBounds { row: 0, col: spec.driver });
    }
    let driver: Vec<f64> = (0..n).map(|i| x.get(i, spec.driver).ok_or(Error::MissingCells)).collect::<Result<_>>()?;
    let mean = driver.iter().sum::<f64>() / n as f64;
    let sd = math::sqrt(driver.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64);
    let z: Vec<f64> = driver.iter().map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 }).collect();
    let alpha = calibrate_mar_intercept(&z, spec.slope, p - 1, spec.d * (n * p) as f64)?;
    let probs: Vec<f64> = z.iter().map(|&v| logistic(alpha + spec.slope * v)).collect();
    for _ in 0..MAX_PUNCH_ATTEMPTS {
        let mut holes = Vec::new();
        for (i, &pr) in probs.iter().enumerate() {
            for j in (0..p).filter(|&j| j != spec.driver) {
                if rng.random::<f64>() < pr {
                    holes.push((i, j));
                }
            }
        }
        match apply_mask(x, &holes) {
            Ok(m) => return Ok(m),
            Err(Error::EmptyRowProduced(_) | Error::ColumnTooSparse(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::CannotSatisfyInvariants)
}

/// Applies the mechanism of `spec`.
pub fn punch(x: &MaskedMatrix, spec: &MissingnessSpec, rng: &mut SeededRng) -> Result<MaskedMatrix> {
    match spec.mechanism {
        Mechanism::Mcar => punch_mcar(x, spec.d, rng),
        Mechanism::Mar => punch_mar(x, spec, rng),
    }
}

/// The data one replicate works on.
#[derive(Debug, Clone)]
pub struct ReplicateData {
    pub seed: u64,
    pub complete: MaskedMatrix,
    pub masked: MaskedMatrix,
    pub y: ResponseVector,
}

/// Generates and punches the dataset of replicate `replicate`.
pub fn replicate_data(cell: &Cell, master_seed: u64, replicate: usize) -> Result<ReplicateData> {
    replicate_data_from_seed(cell, cell.replicate_seed(master_seed, replicate))
}

/// Generates and punches a dataset from a replicate seed.
pub fn replicate_data_from_seed(cell: &Cell, seed: u64) -> Result<ReplicateData> {
    let (complete, y) = gen_reference(&cell.spec, &mut SeededRng::new(seed, STREAM_GENERATE))?;
    let masked = if cell.missing.d > 0.0 {
        punch(&complete, &cell.missing, &mut SeededRng::new(seed, STREAM_PUNCH))?
    } else {
        complete.clone()
    };
    Ok(ReplicateData {
        seed,
        complete,
        masked,
        y,
    })
}

/// Runs every method × criterion on one replicate. Failures are recorded in
/// the results, never raised.
pub fn run_replicate(
    cell: &Cell,
    master_seed: u64,
    replicate: usize,
    methods: &[Method],
    criteria: &[Criterion],
    settings: &PipelineSettings,
    clock: &dyn Clock,
) -> Vec<ReplicateResult> {
    let seed = cell.replicate_seed(master_seed, replicate);
    run_replicate_from_seed(cell, seed, replicate, methods, criteria, settings, clock)
}

/// As [`run_replicate`], from the replicate seed recorded in a result.
pub fn run_replicate_from_seed(
    cell: &Cell,
    seed: u64,
    replicate: usize,
    methods: &[Method],
    criteria: &[Criterion],
    settings: &PipelineSettings,
    clock: &dyn Clock,
) -> Vec<ReplicateResult> {
    let data = replicate_data_from_seed(cell, seed);
    let mut out = Vec::with_capacity(methods.len() * criteria.len());
    for &method in methods {
        let start = clock.now();
        let outcome = data
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|data| run_method(data, cell, method, criteria, settings));
        let elapsed = clock.now() - start;
        let realized_d = data.as_ref().map(|d| d.masked.missing_proportion()).unwrap_or(f64::NAN);
        for (k, &criterion) in criteria.iter().enumerate() {
            let (selected_h, m, dof_fallback, error) = match &outcome {
                Ok(o) => match &o.per_criterion[k] {
                    Ok((h, fb)) => (Some(*h), o.m, *fb, None),
                    Err(e) => (None, o.m, false, Some(e.clone())),
                },
                Err(e) => (None, 0, false, Some(e.clone())),
            };
            out.push(ReplicateResult {
                method,
                criterion,
                mechanism: cell.missing.mechanism,
                d: cell.missing.d,
                n: cell.spec.n,
                p: cell.spec.p,
                true_h: cell.spec.true_h,
                replicate,
                seed,
                realized_d,
                selected_h,
                m,
                dof_fallback,
                error,
                elapsed_seconds: elapsed,
            });
        }
    }
    out
}

/// `replicates` replicates of one method on one cell.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    cell: &Cell,
    method: Method,
    criteria: &[Criterion],
    replicates: usize,
    master_seed: u64,
    settings: &PipelineSettings,
    clock: &dyn Clock,
) -> Vec<ReplicateResult> {
    (0..replicates)
        .flat_map(|r| run_replicate(cell, master_seed, r, &[method], criteria, settings, clock))
        .collect()
}

struct MethodOutcome {
    m: usize,
    per_criterion: Vec<Result<(usize, bool)>>,
}

fn run_method(
    data: &ReplicateData,
    cell: &Cell,
    method: Method,
    criteria: &[Criterion],
    settings: &PipelineSettings,
) -> Result<MethodOutcome> {
    let selection = SelectionSettings {
        h_max: settings.h_max,
        folds: settings.folds,
        cv_mode: settings.cv_mode,
    };
    let cv_rng = SeededRng::new(data.seed, STREAM_CV);
    let impute_rng = SeededRng::new(data.seed, STREAM_IMPUTE);
    let x = &data.masked;
    let datasets: Vec<MaskedMatrix> = if x.is_complete() || method == Method::NipalsDirect {
        vec![x.clone()]
    } else {
        let set = match method {
            Method::Mice => impute_mice_norm(
                x,
                imputations_for_proportion(x.missing_proportion()),
                settings.mice_cycles,
                &impute_rng,
            )?,
            Method::Knn => impute_knn(x, settings.knn_neighbours)?,
            Method::Svd => {
                let max = x.rows().min(x.cols()) - 1;
                let k = settings.svd_rank.unwrap_or(cell.spec.true_h).clamp(1, max.max(1));
                impute_svd(x, k, settings.svd_tolerance, settings.svd_max_iter)?
            }
            Method::NipalsDirect => unreachable!(),
        };
        set.datasets
            .into_iter()
            .map(MaskedMatrix::complete)
            .collect::<Result<_>>()?
    };
    let traces: Vec<Vec<Result<CriterionTrace>>> = datasets
        .iter()
        .map(|d| evaluate(d, &data.y, criteria, &selection, &cv_rng))
        .collect::<Result<_>>()?;
    let per_criterion = (0..criteria.len())
        .map(|k| {
            let mut counts = Vec::with_capacity(traces.len());
            let mut fallback = false;
            let mut first_err = None;
            for t in &traces {
                match &t[k] {
                    Ok(tr) => {
                        counts.push(tr.selected_h);
                        fallback |= tr.dof_fallback;
                    }
                    Err(e) => {
                        first_err.get_or_insert_with(|| e.clone());
                    }
                }
            }
            match pool_component_mode(&counts) {
                Some(h) => Ok((h, fallback)),
                None => Err(first_err.unwrap_or(Error::InvalidArgument("no dataset evaluated"))),
            }
        })
        .collect();
    Ok(MethodOutcome {
        m: datasets.len(),
        per_criterion,
    })
}
