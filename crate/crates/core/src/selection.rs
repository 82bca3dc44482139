//! Choosing the number of components: Q² by cross-validation, AIC and BIC
//! with naive or estimated degrees of freedom.
//!
//! Cross-validation works in the units of the globally standardized data:
//! each training fold is refit (and re-standardized) and the held-out rows
//! are predicted back on the global scale, so `PRESS_h` and the in-sample
//! `RSS_h` (with `RSS_0 = n − 1`) are directly comparable.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{center_scale, MaskedMatrix, ResponseVector};
use crate::dof::{dof_trace, DofEstimate};
use crate::math;
use crate::plsr::{self, PlsModel, PredictionMode};
use crate::rng::SeededRng;
use crate::{Error, Result};

/// A component is kept while `PRESS_h ≤ 0.95² RSS_{h−1}`, i.e.
/// `Q²_h ≥ 1 − 0.95² = 0.0975`.
pub const Q2_THRESHOLD: f64 = 0.0975;

/// Criterion values closer than this are ties, resolved to the smaller `h`.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    Q2Loo,
    Q2KFold,
    Aic,
    AicDof,
    Bic,
    BicDof,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::Q2Loo,
        Criterion::Q2KFold,
        Criterion::Aic,
        Criterion::AicDof,
        Criterion::Bic,
        Criterion::BicDof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Q2Loo => "q2_loo",
            Criterion::Q2KFold => "q2_kfold",
            Criterion::Aic => "aic",
            Criterion::AicDof => "aic_dof",
            Criterion::Bic => "bic",
            Criterion::BicDof => "bic_dof",
        }
    }

    pub fn from_name(s: &str) -> Option<Criterion> {
        Criterion::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn is_cross_validated(self) -> bool {
        matches!(self, Criterion::Q2Loo | Criterion::Q2KFold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvScheme {
    Loo,
    KFold(usize),
}

/// Which prediction path held-out rows take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CvMode {
    /// Every held-out row is predicted as if it had missing cells.
    Standard,
    /// Complete rows take the regular path, incomplete rows the
    /// missing-data path.
    Adaptative,
}

impl CvMode {
    pub fn name(self) -> &'static str {
        match self {
            CvMode::Standard => "standard",
            CvMode::Adaptative => "adaptative",
        }
    }

    pub fn from_name(s: &str) -> Option<CvMode> {
        match s {
            "standard" => Some(CvMode::Standard),
            "adaptative" | "adaptive" => Some(CvMode::Adaptative),
            _ => None,
        }
    }

    fn prediction_mode(self) -> PredictionMode {
        match self {
            CvMode::Standard => PredictionMode::MissingSpecific,
            CvMode::Adaptative => PredictionMode::Regular,
        }
    }
}

/// Values of one criterion for each component count and the selected count.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionTrace {
    pub criterion: Criterion,
    /// `h` of `values[0]`: 1 for Q², 0 for AIC / BIC.
    pub first_h: usize,
    pub values: Vec<f64>,
    pub selected_h: usize,
    /// `None` for criteria that do not cross-validate.
    pub cv_mode: Option<CvMode>,
    pub folds: Option<usize>,
    /// `PRESS_h` for `h = 1..=H` (Q² only).
    pub press: Vec<f64>,
    /// In-sample `RSS_h` for `h = 0..=H`.
    pub rss: Vec<f64>,
    /// Degrees of freedom used, `h = 0..=H` (AIC / BIC only).
    pub dof: Vec<f64>,
    /// A DoF criterion had to use the naive count for at least one `h`.
    pub dof_fallback: bool,
}

impl CriterionTrace {
    pub fn h_max(&self) -> usize {
        self.first_h + self.values.len() - 1
    }

    pub fn value(&self, h: usize) -> Option<f64> {
        h.checked_sub(self.first_h).and_then(|k| self.values.get(k).copied())
    }
}

/// Row indices held out by each fold. LOO holds out every row on its own;
/// k-fold shuffles rows with `rng` and deals them round-robin, so fold sizes
/// differ by at most one.
pub fn fold_assignment(n: usize, scheme: CvScheme, rng: &mut SeededRng) -> Result<Vec<Vec<usize>>> {
    match scheme {
        CvScheme::Loo => Ok((0..n).map(|i| vec![i]).collect()),
        CvScheme::KFold(k) => {
            if k < 2 || k > n {
                return Err(Error::InvalidFolds { k, n });
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut folds = vec![Vec::new(); k];
            for (pos, i) in order.into_iter().enumerate() {
                folds[pos % k].push(i);
            }
            for f in folds.iter_mut() {
                f.sort_unstable();
            }
            Ok(folds)
        }
    }
}

/// `PRESS_h` for `h = 1..=H'`, where `H' ≤ h_max` is the largest count every
/// fold model reached.
pub fn press_trace(
    x: &MaskedMatrix,
    y: &ResponseVector,
    h_max: usize,
    scheme: CvScheme,
    mode: CvMode,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    let (xs, ys, _) = center_scale(x, y)?;
    let folds = fold_assignment(x.rows(), scheme, rng)?;
    press_on_folds(&xs, &ys, h_max, &folds, mode)
}

/// `PRESS_h` with `h` components.
pub fn press(
    x: &MaskedMatrix,
    y: &ResponseVector,
    h: usize,
    scheme: CvScheme,
    mode: CvMode,
    rng: &mut SeededRng,
) -> Result<f64> {
    let trace = press_trace(x, y, h, scheme, mode, rng)?;
    trace.get(h.wrapping_sub(1)).copied().ok_or(Error::ComponentDegenerate(trace.len() + 1))
}

fn press_on_folds(
    xs: &MaskedMatrix,
    ys: &ResponseVector,
    h_max: usize,
    folds: &[Vec<usize>],
    mode: CvMode,
) -> Result<Vec<f64>> {
    let n = xs.rows();
    let mut preds: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut reached = h_max;
    let mut held = vec![false; n];
    for (f, fold) in folds.iter().enumerate() {
        held.iter_mut().for_each(|v| *v = false);
        for &i in fold {
            held[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !held[i]).collect();
        let x_train = xs.select_rows(&train).map_err(|_| Error::FoldDegenerate(f))?;
        let y_train = ys.select(&train);
        let h_fold = h_max.min(plsr::max_components(train.len(), xs.cols()));
        if h_fold == 0 {
            return Err(Error::FoldDegenerate(f));
        }
        let model = plsr::fit(&x_train, &y_train, h_fold).map_err(|e| match e {
            Error::ZeroVarianceColumn(_)
            | Error::TooFewObserved(_)
            | Error::ZeroVarianceResponse
            | Error::EmptyIndexSet { .. }
            | Error::ComponentDegenerate(_) => Error::FoldDegenerate(f),
            other => other,
        })?;
        reached = reached.min(model.n_components());
        for &i in fold {
            preds[i] = model.predict_all(&xs.row_options(i), mode.prediction_mode())?;
        }
    }
    let y = ys.as_slice();
    Ok((0..reached)
        .map(|h| {
            (0..n)
                .map(|i| {
                    let r = y[i] - preds[i][h];
                    r * r
                })
                .sum()
        })
        .collect())
}

/// Q²_h = 1 − PRESS_h / RSS_{h−1} and the sequential selection: the largest
/// `h` such that every component `1..=h` passes [`Q2_THRESHOLD`].
pub fn q2_trace(
    x: &MaskedMatrix,
    y: &ResponseVector,
    h_max: usize,
    scheme: CvScheme,
    mode: CvMode,
    rng: &mut SeededRng,
) -> Result<CriterionTrace> {
    let model = plsr::fit(x, y, h_max)?;
    q2_trace_with_model(x, y, &model, h_max, scheme, mode, rng)
}

/// As [`q2_trace`], reusing an already fitted full-data model for `RSS`.
pub fn q2_trace_with_model(
    x: &MaskedMatrix,
    y: &ResponseVector,
    model: &PlsModel,
    h_max: usize,
    scheme: CvScheme,
    mode: CvMode,
    rng: &mut SeededRng,
) -> Result<CriterionTrace> {
    let n = x.rows();
    let h_max = h_max.min(model.n_components());
    let mut press = press_trace(x, y, h_max, scheme, mode, rng)?;
    let mut rss = plsr::rss_trace(model, y)?;
    rss[0] = (n - 1) as f64;
    let h_eff = press.len().min(h_max);
    press.truncate(h_eff);
    rss.truncate(h_eff + 1);
    let values: Vec<f64> = (1..=h_eff).map(|h| 1.0 - press[h - 1] / rss[h - 1]).collect();
    let selected_h = values.iter().take_while(|&&q| q >= Q2_THRESHOLD).count();
    let (criterion, folds) = match scheme {
        CvScheme::Loo => (Criterion::Q2Loo, None),
        CvScheme::KFold(k) => (Criterion::Q2KFold, Some(k)),
    };
    Ok(CriterionTrace {
        criterion,
        first_h: 1,
        values,
        selected_h,
        cv_mode: Some(mode),
        folds,
        press,
        rss,
        dof: Vec::new(),
        dof_fallback: false,
    })
}

fn dof_for(
    x: &MaskedMatrix,
    y: &ResponseVector,
    model: &PlsModel,
    h_max: usize,
    use_dof: bool,
) -> Result<(DofEstimate, bool)> {
    if !use_dof {
        return Ok((DofEstimate::naive(h_max), false));
    }
    if !x.is_complete() {
        return Ok((DofEstimate::naive(h_max), true));
    }
    let est = dof_trace(x, y, model, h_max)?;
    let fallback = est.naive_fallback.iter().any(|&f| f);
    Ok((est, fallback))
}

fn argmin_smallest(values: &[f64]) -> usize {
    let mut best = 0;
    for (h, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] - TIE_TOLERANCE {
            best = h;
        }
    }
    best
}

/// `AIC(h) = n log(RSS_h / n) + 2 γ(h)` for `h = 0..=H`.
pub fn aic_trace(
    x: &MaskedMatrix,
    y: &ResponseVector,
    model: &PlsModel,
    h_max: usize,
    use_dof: bool,
) -> Result<CriterionTrace> {
    let n = x.rows() as f64;
    let h_max = h_max.min(model.n_components());
    let mut rss = plsr::rss_trace(model, y)?;
    rss.truncate(h_max + 1);
    let (dof, dof_fallback) = dof_for(x, y, model, h_max, use_dof)?;
    let values: Vec<f64> = (0..=h_max)
        .map(|h| n * math::ln(rss[h] / n) + 2.0 * dof.values[h])
        .collect();
    Ok(CriterionTrace {
        criterion: if use_dof { Criterion::AicDof } else { Criterion::Aic },
        first_h: 0,
        selected_h: argmin_smallest(&values),
        values,
        cv_mode: None,
        folds: None,
        press: Vec::new(),
        rss,
        dof: dof.values,
        dof_fallback,
    })
}

/// `BIC(h) = RSS_h / n + log(n) (γ(h) / n) σ̂²_ε`, with the error variance
/// taken from the largest model: `σ̂²_ε = RSS_H / (n − γ(H))`.
pub fn bic_trace(
    x: &MaskedMatrix,
    y: &ResponseVector,
    model: &PlsModel,
    h_max: usize,
    use_dof: bool,
) -> Result<CriterionTrace> {
    let n = x.rows() as f64;
    let h_max = h_max.min(model.n_components());
    let mut rss = plsr::rss_trace(model, y)?;
    rss.truncate(h_max + 1);
    let (dof, dof_fallback) = dof_for(x, y, model, h_max, use_dof)?;
    let sigma2 = error_variance(rss[h_max], n, dof.values[h_max]);
    let values: Vec<f64> = (0..=h_max)
        .map(|h| rss[h] / n + math::ln(n) * (dof.values[h] / n) * sigma2)
        .collect();
    Ok(CriterionTrace {
        criterion: if use_dof { Criterion::BicDof } else { Criterion::Bic },
        first_h: 0,
        selected_h: argmin_smallest(&values),
        values,
        cv_mode: None,
        folds: None,
        press: Vec::new(),
        rss,
        dof: dof.values,
        dof_fallback,
    })
}

// The residual degrees of freedom are floored at 1: with clipping at
// min(n, p + 1) a saturated model can reach γ = n.
fn error_variance(rss: f64, n: f64, gamma: f64) -> f64 {
    rss / (n - gamma).max(1.0)
}

/// Settings shared by [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSettings {
    pub h_max: usize,
    pub folds: usize,
    pub cv_mode: CvMode,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        SelectionSettings {
            h_max: 8,
            folds: DEFAULT_FOLDS,
            cv_mode: CvMode::Standard,
        }
    }
}

/// Runs every requested criterion on one dataset from a single full-data
/// fit. Each criterion succeeds or fails on its own; a failing full-data
/// fit fails them all.
pub fn evaluate(
    x: &MaskedMatrix,
    y: &ResponseVector,
    criteria: &[Criterion],
    settings: &SelectionSettings,
    rng: &SeededRng,
) -> Result<Vec<Result<CriterionTrace>>> {
    let h_max = settings.h_max.min(plsr::max_components(x.rows(), x.cols()));
    let model = plsr::fit(x, y, h_max)?;
    Ok(criteria
        .iter()
        .map(|&c| {
            let mut cv_rng = rng.substream(c as u64);
            match c {
                Criterion::Q2Loo => q2_trace_with_model(x, y, &model, h_max, CvScheme::Loo, settings.cv_mode, &mut cv_rng),
                Criterion::Q2KFold => q2_trace_with_model(
                    x,
                    y,
                    &model,
                    h_max,
                    CvScheme::KFold(settings.folds),
                    settings.cv_mode,
                    &mut cv_rng,
                ),
                Criterion::Aic => aic_trace(x, y, &model, h_max, false),
                Criterion::AicDof => aic_trace(x, y, &model, h_max, true),
                Criterion::Bic => bic_trace(x, y, &model, h_max, false),
                Criterion::BicDof => bic_trace(x, y, &model, h_max, true),
            }
        })
        .collect())
}
