//! Acceptance suite: one PASS / FAIL line per criterion. Exits non-zero
//! when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use plsmiss::config::GridConfig;
use plsmiss::grid::{rerun_rows, run_grid, RESULTS_FILE};
use plsmiss::results::{read_results, render_rows};
use plsmiss_core::data::apply_mask;
use plsmiss_core::dof::dof_estimate_raw;
use plsmiss_core::impute::{impute_knn, impute_mice_norm, impute_svd, imputations_for_proportion};
use plsmiss_core::nipals::nipals_complete;
use plsmiss_core::plsr::fit;
use plsmiss_core::selection::Criterion;
use plsmiss_core::simulate::{
    gen_reference, punch_mar, punch_mcar, run_cell, Cell, Method, MissingnessSpec, NoClock, PipelineSettings,
    ReplicateResult, SimSpec,
};
use plsmiss_core::{MaskedMatrix, Matrix, ResponseVector, SeededRng};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const MASTER_SEED: u64 = 2024;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn c1_nipals_vs_eigen() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = SeededRng::new(seed, 1);
        let x = Matrix::from_fn(8, 5, |_, _| normal(&mut rng));
        let f = nipals_complete(&MaskedMatrix::complete(x.clone()).unwrap(), 1).unwrap();
        let p: DVector<f64> = DVector::from_fn(5, |j, _| f.loadings[(j, 0)]);
        let xd = to_dmatrix(&x);
        let eig = SymmetricEigen::new(xd.transpose() * &xd);
        let top = eig.eigenvalues.imax();
        let v = eig.eigenvectors.column(top).into_owned();
        let cos = p.dot(&v).abs() / p.norm();
        let sin = (&p / p.norm() - &v * p.dot(&v).signum() * cos).norm();
        worst = worst.max(sin.atan2(cos));
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-7 && within(elapsed, 5.0),
        format!("max angle {worst:.2e} rad over 50 matrices, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn c2_pls_saturation() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = SeededRng::new(seed, 2);
        let x = Matrix::from_fn(30, 5, |_, _| normal(&mut rng));
        let y: Vec<f64> = (0..30)
            .map(|i| x.row(i).iter().enumerate().map(|(j, v)| v * (j as f64 - 2.0)).sum::<f64>() + normal(&mut rng))
            .collect();
        let model = fit(
            &MaskedMatrix::complete(x.clone()).unwrap(),
            &ResponseVector::new(y.clone()).unwrap(),
            5,
        )
        .unwrap();
        let pls: Vec<f64> = model.fitted(5).unwrap().into_iter().map(|f| model.scaling.unscale_y(f)).collect();
        let design = DMatrix::from_fn(30, 6, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let yv = DVector::from_vec(y);
        let beta = (design.transpose() * &design)
            .cholesky()
            .unwrap()
            .solve(&(design.transpose() * &yv));
        let ols = &design * beta;
        let rmse = (pls.iter().zip(ols.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 30.0).sqrt();
        worst = worst.max(rmse);
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-6 && within(elapsed, 5.0),
        format!("max RMSE vs OLS {worst:.2e} over 20 instances, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn fitted_original(x: &MaskedMatrix, y: &[f64], h: usize) -> Vec<f64> {
    let m = fit(x, &ResponseVector::new(y.to_vec()).unwrap(), h).unwrap();
    m.fitted(h).unwrap().into_iter().map(|f| m.scaling.unscale_y(f)).collect()
}

/// `Σ_i ∂ŷ_i/∂y_i` of the full fitted values, i.e. 1 + the divergence of
/// the centred fit, by central differences.
fn divergence_dof(x: &MaskedMatrix, y: &[f64], h: usize) -> f64 {
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let eps = 1e-5 * sd;
    (0..n)
        .map(|i| {
            let mut up = y.to_vec();
            up[i] += eps;
            let mut down = y.to_vec();
            down[i] -= eps;
            (fitted_original(x, &up, h)[i] - fitted_original(x, &down, h)[i]) / (2.0 * eps)
        })
        .sum()
}

fn c3_dof_divergence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = SeededRng::new(seed, 3);
        let x = Matrix::from_fn(25, 6, |_, _| normal(&mut rng));
        let beta: Vec<f64> = (0..6).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (0..25)
            .map(|i| x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 1.5 * normal(&mut rng))
            .collect();
        let xm = MaskedMatrix::complete(x).unwrap();
        let yv = ResponseVector::new(y.clone()).unwrap();
        let model = fit(&xm, &yv, 3).unwrap();
        for h in 1..=3 {
            let est = dof_estimate_raw(&xm, &yv, &model, h).unwrap();
            worst = worst.max((est - divergence_dof(&xm, &y, h)).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 0.1 && within(elapsed, 60.0),
        format!("max |estimate - divergence| {worst:.2e} over 10 instances x h=1..3, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn cell(n: usize, p: usize, h: usize, missing: MissingnessSpec) -> Cell {
    Cell {
        spec: SimSpec::new(n, p, h),
        missing,
    }
}

fn replicates(cell: &Cell, methods: &[Method], criteria: &[Criterion], count: usize) -> Vec<ReplicateResult> {
    let settings = PipelineSettings::default();
    let per: Vec<Vec<ReplicateResult>> = (0..count)
        .into_par_iter()
        .map(|r| plsmiss_core::simulate::run_replicate(cell, MASTER_SEED, r, methods, criteria, &settings, &NoClock))
        .collect();
    per.into_iter().flatten().collect()
}

fn c4_q2_threshold() -> Outcome {
    let start = Instant::now();
    let c = cell(100, 20, 2, MissingnessSpec::mcar(0.0));
    let results = run_cell(&c, Method::NipalsDirect, &[Criterion::Q2Loo], 100, MASTER_SEED, &PipelineSettings::default(), &NoClock);
    let correct = results.iter().filter(|r| r.is_correct()).count();
    let elapsed = start.elapsed();
    outcome(
        correct >= 90 && within(elapsed, 600.0),
        format!("Q2-LOO selected 2 in {correct}/100 replicates, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn correct_rate(results: &[ReplicateResult]) -> f64 {
    results.iter().filter(|r| r.is_correct()).count() as f64 / results.len() as f64
}

fn c5_trend() -> Outcome {
    let low = replicates(&cell(100, 20, 4, MissingnessSpec::mcar(0.05)), &[Method::NipalsDirect], &[Criterion::Q2Loo], 100);
    let high = replicates(&cell(100, 20, 4, MissingnessSpec::mcar(0.5)), &[Method::NipalsDirect], &[Criterion::Q2Loo], 100);
    let (a, b) = (correct_rate(&low), correct_rate(&high));
    outcome(
        a - b >= 0.20,
        format!("correct at d=5%: {:.0}%, at d=50%: {:.0}%, gap {:.0}pp", a * 100.0, b * 100.0, (a - b) * 100.0),
    )
}

fn mean_selected(results: &[ReplicateResult], method: Method, criterion: Criterion) -> f64 {
    let hs: Vec<f64> = results
        .iter()
        .filter(|r| r.method == method && r.criterion == criterion)
        .filter_map(|r| r.selected_h)
        .map(|h| h as f64)
        .collect();
    hs.iter().sum::<f64>() / hs.len() as f64
}

fn c6_ordering() -> Outcome {
    let criteria = [Criterion::Q2Loo, Criterion::Aic, Criterion::Bic];
    let results = replicates(&cell(100, 20, 2, MissingnessSpec::mcar(0.1)), &Method::ALL, &criteria, 100);
    let errors = results.iter().filter(|r| r.error.is_some()).count();
    let mut pass = errors == 0;
    let mut parts = Vec::new();
    for method in Method::ALL {
        let q2 = mean_selected(&results, method, Criterion::Q2Loo);
        let aic = mean_selected(&results, method, Criterion::Aic);
        let bic = mean_selected(&results, method, Criterion::Bic);
        pass &= aic >= q2 && bic >= q2;
        parts.push(format!("{} q2 {q2:.2} aic {aic:.2} bic {bic:.2}", method.name()));
    }
    outcome(pass, format!("mean selected_h: {}; errors {errors}", parts.join("; ")))
}

fn bits_preserved(x: &MaskedMatrix, d: &Matrix) -> bool {
    (0..x.rows()).all(|i| {
        (0..x.cols()).all(|j| match x.get(i, j) {
            Some(v) => v.to_bits() == d[(i, j)].to_bits(),
            None => d[(i, j)].is_finite(),
        })
    })
}

fn c7_preservation() -> Outcome {
    let mut rng = SeededRng::new(MASTER_SEED, 7);
    let mut cases = Vec::with_capacity(1000);
    while cases.len() < 1000 {
        let n = rng.random_range(6..20usize);
        let p = rng.random_range(3..9usize);
        let scale = 10f64.powi(rng.random_range(-3..4));
        let full = MaskedMatrix::complete(Matrix::from_fn(n, p, |_, _| scale * normal(&mut rng))).unwrap();
        let count = rng.random_range(1..=(n * p) / 2);
        let holes: Vec<(usize, usize)> = sample(&mut rng, n * p, count).into_iter().map(|c| (c / p, c % p)).collect();
        if let Ok(x) = apply_mask(&full, &holes) {
            cases.push((x, rng.random::<u64>()));
        }
    }
    let failures: Vec<String> = cases
        .par_iter()
        .enumerate()
        .filter_map(|(k, (x, seed))| {
            let cells = x.rows() * x.cols();
            let missing = x.missing_count();
            // ceil(100 · missing / cells) in exact integer arithmetic
            let m_oracle = (100 * missing).div_ceil(cells).max(1);
            let m = imputations_for_proportion(x.missing_proportion());
            if m != m_oracle {
                return Some(format!("case {k}: m {m} vs {m_oracle}"));
            }
            let mice = impute_mice_norm(x, m, 5, &SeededRng::new(*seed, 2)).ok()?;
            let knn = impute_knn(x, 5).ok()?;
            let svd = impute_svd(x, 1, 1e-6, 100).ok()?;
            let ok = mice.m() == m
                && mice.datasets.iter().all(|d| bits_preserved(x, d))
                && bits_preserved(x, &knn.datasets[0])
                && bits_preserved(x, &svd.datasets[0]);
            (!ok).then(|| format!("case {k}: observed cell changed"))
        })
        .collect();
    let errors = cases
        .par_iter()
        .filter(|(x, seed)| {
            impute_mice_norm(x, 1, 5, &SeededRng::new(*seed, 2)).is_err()
                || impute_knn(x, 5).is_err()
                || impute_svd(x, 1, 1e-6, 100).is_err()
        })
        .count();
    outcome(
        failures.is_empty() && errors == 0,
        format!(
            "1000 matrices x 3 imputers: {} violations, {errors} imputer errors{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn driver_association(x: &MaskedMatrix, m: &MaskedMatrix) -> bool {
    let n = x.rows();
    let missing: Vec<usize> = (0..n).map(|i| m.row_mask(i).iter().filter(|o| !**o).count()).collect();
    let mut sorted = missing.clone();
    sorted.sort_unstable();
    let median = (sorted[(n - 1) / 2] + sorted[n / 2]) as f64 / 2.0;
    let mean = |above: bool| {
        let v: Vec<f64> = (0..n)
            .filter(|&i| if above { missing[i] as f64 > median } else { (missing[i] as f64) < median })
            .map(|i| x.get(i, 0).unwrap())
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    mean(true) > mean(false)
}

fn c8_mechanisms() -> Outcome {
    let (x, _) = gen_reference(&SimSpec::new(100, 20, 2), &mut SeededRng::new(MASTER_SEED, 0)).unwrap();
    let mut rng = SeededRng::new(MASTER_SEED, 8);
    let mut counts = [0usize; 20];
    for _ in 0..1000 {
        let m = punch_mcar(&x, 0.2, &mut rng).unwrap();
        for (j, c) in counts.iter_mut().enumerate() {
            *c += 100 - m.observed_in_col(j);
        }
    }
    let total: usize = counts.iter().sum();
    let expected = total as f64 / 20.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new(19.0).unwrap().cdf(stat);

    let mut hits = 0;
    for draw in 0..1000u64 {
        let (x, _) = gen_reference(&SimSpec::new(100, 20, 2), &mut SeededRng::new(MASTER_SEED + draw, 0)).unwrap();
        let m = punch_mar(&x, &MissingnessSpec::mar(0.2), &mut SeededRng::new(draw, 1)).unwrap();
        hits += usize::from(driver_association(&x, &m));
    }
    outcome(
        p_value > 0.01 && hits >= 950,
        format!("MCAR column chi-square p = {p_value:.3}; MAR driver association in {hits}/1000 draws"),
    )
}

fn c9_determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let cfg = GridConfig {
        output: Some(tmp.path().to_path_buf()),
        shapes: vec![[40, 10], [20, 30]],
        proportions: vec![0.1, 0.4],
        true_components: vec![2, 4],
        replicates: 3,
        seed: MASTER_SEED,
        ..GridConfig::default()
    };
    run_grid(&cfg, false).unwrap();
    let text = std::fs::read(tmp.path().join(RESULTS_FILE)).unwrap();
    let body = &text[text.iter().position(|&b| b == b'\n').unwrap() + 1..];
    let rows = read_results(&tmp.path().join(RESULTS_FILE)).unwrap();
    let per_replicate = cfg.methods.len() * cfg.criteria.len();
    let mut rerendered = Vec::with_capacity(body.len());
    for group in rows.chunks(per_replicate) {
        let again = rerun_rows(&cfg, &group[0]).unwrap();
        rerendered.extend(render_rows(&again).unwrap());
    }
    let groups = rows.len() / per_replicate;
    outcome(
        rerendered == body,
        format!(
            "{groups} replicates ({} rows) rerun from recorded seeds: {}",
            rows.len(),
            if rerendered == body { "byte-identical" } else { "MISMATCH" }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Check; 9] = [
        ("1 NIPALS vs eigendecomposition", c1_nipals_vs_eigen),
        ("2 PLS saturation vs OLS", c2_pls_saturation),
        ("3 DoF vs divergence", c3_dof_divergence),
        ("4 Q2 threshold on planted h=2", c4_q2_threshold),
        ("5 trend over missing proportion", c5_trend),
        ("6 AIC/BIC select at least Q2-LOO", c6_ordering),
        ("7 imputation preserves observed cells", c7_preservation),
        ("8 MCAR / MAR mechanism validity", c8_mechanisms),
        ("9 rerun from seed is byte-identical", c9_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!("{} criterion {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
