use plsmiss_core::selection::Criterion;
use plsmiss_core::simulate::{
    gen_reference, punch_mar, punch_mcar, replicate_data, run_cell, run_replicate, Cell, Method, MissingnessSpec,
    NoClock, PipelineSettings, SimSpec,
};
use plsmiss_core::{MaskedMatrix, SeededRng};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn reference(n: usize, p: usize, seed: u64) -> MaskedMatrix {
    gen_reference(&SimSpec::new(n, p, 2), &mut SeededRng::new(seed, 0)).unwrap().0
}

fn chi_square_uniform_p(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn mcar_columns_are_uniform() {
    let x = reference(30, 8, 1);
    let mut rng = SeededRng::new(2, 1);
    let mut counts = vec![0usize; 8];
    for _ in 0..1000 {
        let m = punch_mcar(&x, 0.2, &mut rng).unwrap();
        assert_eq!(m.missing_count(), 48);
        for (j, c) in counts.iter_mut().enumerate() {
            *c += 30 - m.observed_in_col(j);
        }
    }
    let p = chi_square_uniform_p(&counts);
    assert!(p > 0.01, "p = {p}, counts {counts:?}");
}

#[test]
fn mar_without_slope_spreads_holes_uniformly_over_rows() {
    let x = reference(25, 6, 3);
    let spec = MissingnessSpec {
        slope: 0.0,
        ..MissingnessSpec::mar(0.2)
    };
    let mut rng = SeededRng::new(4, 1);
    let mut rows = vec![0usize; 25];
    for _ in 0..1000 {
        let m = punch_mar(&x, &spec, &mut rng).unwrap();
        for (i, r) in rows.iter_mut().enumerate() {
            *r += m.row_mask(i).iter().filter(|o| !**o).count();
        }
    }
    let p = chi_square_uniform_p(&rows);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn mar_hits_target_proportion_on_average() {
    let x = reference(100, 20, 5);
    let mut rng = SeededRng::new(6, 1);
    for d in [0.05, 0.25, 0.5] {
        let mean: f64 = (0..1000)
            .map(|_| punch_mar(&x, &MissingnessSpec::mar(d), &mut rng).unwrap().missing_proportion())
            .sum::<f64>()
            / 1000.0;
        assert!((mean - d).abs() < 0.005, "d {d}: realized {mean}");
    }
}

#[test]
fn mar_missingness_follows_driver() {
    let mut hits = 0;
    for draw in 0..200u64 {
        let x = reference(100, 20, 100 + draw);
        let m = punch_mar(&x, &MissingnessSpec::mar(0.2), &mut SeededRng::new(draw, 1)).unwrap();
        if driver_association(&x, &m) {
            hits += 1;
        }
    }
    assert!(hits >= 190, "{hits} of 200");
}

/// Mean driver value of rows with above-median missingness exceeds that of
/// rows below the median.
pub fn driver_association(x: &MaskedMatrix, m: &MaskedMatrix) -> bool {
    let n = x.rows();
    let missing: Vec<usize> = (0..n).map(|i| m.row_mask(i).iter().filter(|o| !**o).count()).collect();
    let mut sorted = missing.clone();
    sorted.sort_unstable();
    let median = (sorted[(n - 1) / 2] + sorted[n / 2]) as f64 / 2.0;
    let mean = |pred: &dyn Fn(f64) -> bool| {
        let v: Vec<f64> = (0..n).filter(|&i| pred(missing[i] as f64)).map(|i| x.get(i, 0).unwrap()).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    mean(&|c| c > median) > mean(&|c| c < median)
}

#[test]
fn replicate_is_pure() {
    let cell = Cell {
        spec: SimSpec::new(40, 10, 2),
        missing: MissingnessSpec::mcar(0.1),
    };
    let criteria = [Criterion::Q2KFold, Criterion::Aic, Criterion::BicDof];
    let settings = PipelineSettings::default();
    let all = run_cell(&cell, Method::Mice, &criteria, 3, 11, &settings, &NoClock);
    assert_eq!(all.len(), 9);
    let again = run_replicate(&cell, 11, 1, &[Method::Mice], &criteria, &settings, &NoClock);
    assert_eq!(&all[3..6], &again[..]);
    assert_eq!(all[0].m, 10);
    assert!(all.iter().all(|r| r.selected_h.is_some_and(|h| h <= 8)));
}

#[test]
fn methods_share_datasets() {
    let cell = Cell {
        spec: SimSpec::new(30, 8, 2),
        missing: MissingnessSpec::mar(0.15),
    };
    let a = replicate_data(&cell, 3, 4).unwrap();
    let b = replicate_data(&cell, 3, 4).unwrap();
    assert_eq!(a.masked, b.masked);
    let results = run_replicate(&cell, 3, 4, &Method::ALL, &[Criterion::Aic], &PipelineSettings::default(), &NoClock);
    assert_eq!(results.len(), 4);
    assert!(results.iter().all(|r| r.seed == a.seed));
    assert!(results.iter().all(|r| r.realized_d == a.masked.missing_proportion()));
    assert!(!results[0].dof_fallback && results.iter().all(|r| r.error.is_none()));
}

#[test]
fn horizontal_shape_runs_every_method() {
    let cell = Cell {
        spec: SimSpec::new(20, 100, 2),
        missing: MissingnessSpec::mcar(0.3),
    };
    let results = run_replicate(
        &cell,
        9,
        0,
        &Method::ALL,
        &Criterion::ALL,
        &PipelineSettings::default(),
        &NoClock,
    );
    assert_eq!(results.len(), 24);
    for r in &results {
        assert!(r.error.is_none(), "{:?} {:?}: {:?}", r.method, r.criterion, r.error);
        assert!(r.selected_h.unwrap() <= 8);
    }
}
