use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use plsmiss::commands::{run_fit, run_impute, run_predict, run_select, FIT_REPORT_FILE, MODEL_FILE, PREDICTIONS_FILE};
use plsmiss::config::{FitConfig, GridConfig, ImputeConfig, PredictConfig, SelectConfig, SummarizeConfig, RESOLVED_CONFIG};
use plsmiss::csv_io::read_table;
use plsmiss::grid::{run_grid, RESULTS_FILE};
use plsmiss::model_io;
use plsmiss::results::read_results;
use plsmiss::summarize::{run_summarize, FREQUENCIES_FILE, PLOTS_DIR};
use plsmiss::CliError;
use plsmiss_core::impute::imputations_for_proportion;
use plsmiss_core::selection::{q2_trace, Criterion, CvMode, CvScheme};
use plsmiss_core::{PredictionMode, SeededRng};
use rand_distr::{Distribution, StandardNormal};
use tempfile::TempDir;

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

/// `n × p` predictors driven by two latent factors, response `y` last.
fn toy_csv(dir: &Path, n: usize, p: usize, noise: f64, holes: &[(usize, usize)], seed: u64) -> PathBuf {
    let mut rng = SeededRng::new(seed, 0);
    let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
    let load: Vec<[f64; 2]> = (0..p).map(|_| [g(), g()]).collect();
    let mut rows = Vec::new();
    for i in 0..n {
        let (a, b) = (g(), g());
        let mut row: Vec<String> = load
            .iter()
            .enumerate()
            .map(|(j, l)| {
                if holes.contains(&(i, j)) {
                    "NA".to_owned()
                } else {
                    format!("{}", l[0] * a + l[1] * b + noise * g())
                }
            })
            .collect();
        row.push(format!("{}", a - 0.5 * b + noise * g()));
        rows.push(row);
    }
    let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    let path = dir.join(format!("toy_{seed}.csv"));
    write_csv(&path, &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows);
    path
}

fn fit_config(input: &Path, out: &Path) -> FitConfig {
    FitConfig {
        input: Some(input.into()),
        output: Some(out.into()),
        ..FitConfig::default()
    }
}

#[test]
fn fit_reports_rss0_equal_to_n_minus_one_and_is_repeatable() {
    let tmp = TempDir::new().unwrap();
    let input = toy_csv(tmp.path(), 25, 6, 0.3, &[], 1);
    let out = tmp.path().join("fit");
    let report = run_fit(&fit_config(&input, &out)).unwrap();
    assert!((report.rss[0] - 24.0).abs() < 1e-10, "{}", report.rss[0]);
    assert!(report.rss.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    let first = fs::read(out.join(FIT_REPORT_FILE)).unwrap();
    let model = fs::read(out.join(MODEL_FILE)).unwrap();
    run_fit(&fit_config(&input, &out)).unwrap();
    assert_eq!(first, fs::read(out.join(FIT_REPORT_FILE)).unwrap());
    assert_eq!(model, fs::read(out.join(MODEL_FILE)).unwrap());
    assert!(out.join(RESOLVED_CONFIG).exists());
}

#[test]
fn missing_response_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("bad.csv");
    fs::write(&input, "a,b,y\n1,2,3\n2,3,\n4,1,2\n5,5,1\n").unwrap();
    let err = run_fit(&fit_config(&input, &tmp.path().join("o"))).unwrap_err();
    assert!(matches!(err, CliError::Data(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn predictions_match_the_library() {
    let tmp = TempDir::new().unwrap();
    let input = toy_csv(tmp.path(), 30, 5, 0.2, &[(3, 1), (7, 4)], 2);
    let out = tmp.path().join("fit");
    run_fit(&FitConfig {
        components: 3,
        ..fit_config(&input, &out)
    })
    .unwrap();
    let saved = model_io::load(&out.join(MODEL_FILE)).unwrap();
    let rows = read_table(&input).unwrap().select_columns(&saved.features).unwrap();
    for (mode_name, mode) in [("regular", PredictionMode::Regular), ("missing", PredictionMode::MissingSpecific)] {
        let pout = tmp.path().join(mode_name);
        run_predict(&PredictConfig {
            model: Some(out.join(MODEL_FILE)),
            input: Some(input.clone()),
            output: Some(pout.clone()),
            mode: mode_name.into(),
            components: Some(2),
        })
        .unwrap();
        let table = read_table(&pout.join(PREDICTIONS_FILE)).unwrap();
        assert_eq!(table.headers, vec!["row", "h2"]);
        for (i, row) in rows.iter().enumerate() {
            let expect = saved.model.predict(row, 2, mode).unwrap();
            assert_eq!(table.rows[i][1].unwrap().to_bits(), expect.to_bits());
        }
    }
}

fn select_config(input: &Path, out: &Path) -> SelectConfig {
    SelectConfig {
        input: Some(input.into()),
        output: Some(out.into()),
        h_max: 5,
        ..SelectConfig::default()
    }
}

#[test]
fn noiseless_rank_two_selects_at_least_two_everywhere() {
    let tmp = TempDir::new().unwrap();
    let input = toy_csv(tmp.path(), 30, 8, 0.0, &[], 3);
    let traces = run_select(&select_config(&input, &tmp.path().join("s"))).unwrap();
    assert_eq!(traces.len(), 6);
    for t in &traces {
        assert!(t.selected_h >= 2, "{:?} selected {}", t.criterion, t.selected_h);
    }
}

#[test]
fn select_q2_column_equals_library_trace() {
    let tmp = TempDir::new().unwrap();
    let input = toy_csv(tmp.path(), 25, 6, 0.5, &[(1, 2), (9, 0), (14, 5)], 4);
    let out = tmp.path().join("s");
    let cfg = SelectConfig {
        criteria: vec!["q2_loo".into()],
        ..select_config(&input, &out)
    };
    run_select(&cfg).unwrap();
    let data = read_table(&input).unwrap().into_dataset(None).unwrap();
    let lib = q2_trace(&data.x, &data.y, 5, CvScheme::Loo, CvMode::Standard, &mut SeededRng::new(0, 0)).unwrap();
    let text = fs::read_to_string(out.join("criteria.csv")).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), lib.values.len());
    for (a, b) in values.iter().zip(&lib.values) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    let selected = fs::read_to_string(out.join("selected.csv")).unwrap();
    assert!(selected.contains(&format!("q2_loo,standard,{},0", lib.selected_h)));
}

#[test]
fn adaptative_equals_standard_on_complete_data() {
    let tmp = TempDir::new().unwrap();
    let input = toy_csv(tmp.path(), 30, 6, 0.4, &[], 5);
    let run = |mode: &str| {
        run_select(&SelectConfig {
            criteria: vec!["q2_loo".into(), "q2_kfold".into()],
            cv_mode: mode.into(),
            ..select_config(&input, &tmp.path().join(mode))
        })
        .unwrap()
    };
    let (s, a) = (run("standard"), run("adaptative"));
    for (x, y) in s.iter().zip(&a) {
        assert_eq!(x.selected_h, y.selected_h);
        for (u, v) in x.values.iter().zip(&y.values) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}

#[test]
fn impute_writes_one_file_per_dataset() {
    let tmp = TempDir::new().unwrap();
    let input = toy_csv(tmp.path(), 20, 4, 0.3, &[(0, 0), (5, 2), (11, 3)], 6);
    let out = tmp.path().join("imp");
    let set = run_impute(&ImputeConfig {
        input: Some(input.clone()),
        output: Some(out.clone()),
        ..ImputeConfig::default()
    })
    .unwrap();
    // 3 of 100 cells missing: m = 3
    assert_eq!(set.m(), 3);
    let src = read_table(&input).unwrap();
    for k in 1..=3 {
        let t = read_table(&out.join(format!("imputed_{k}.csv"))).unwrap();
        assert_eq!(t.headers, src.headers);
        for (a, b) in src.rows.iter().zip(&t.rows) {
            for (u, v) in a.iter().zip(b) {
                let v = v.unwrap();
                if let Some(u) = u {
                    assert_eq!(u.to_bits(), v.to_bits());
                }
            }
        }
    }
}

fn small_grid(out: &Path) -> GridConfig {
    GridConfig {
        output: Some(out.into()),
        shapes: vec![[30, 8]],
        proportions: vec![0.1, 0.3],
        true_components: vec![2],
        replicates: 4,
        seed: 7,
        ..GridConfig::default()
    }
}

#[test]
fn grid_output_is_independent_of_thread_count() {
    let tmp = TempDir::new().unwrap();
    let one = tmp.path().join("one");
    let many = tmp.path().join("many");
    let report = run_grid(
        &GridConfig {
            threads: Some(1),
            ..small_grid(&one)
        },
        false,
    )
    .unwrap();
    assert_eq!(report.cells, 4);
    assert_eq!(report.rows, 4 * 4 * 4 * 6);
    run_grid(
        &GridConfig {
            threads: Some(4),
            ..small_grid(&many)
        },
        false,
    )
    .unwrap();
    assert_eq!(fs::read(one.join(RESULTS_FILE)).unwrap(), fs::read(many.join(RESULTS_FILE)).unwrap());
    let rows = read_results(&one.join(RESULTS_FILE)).unwrap();
    assert_eq!(rows.len(), report.rows);
    for r in rows.iter().filter(|r| r.method.name() == "mice" && r.error.is_none()) {
        assert_eq!(r.m, imputations_for_proportion(r.realized_d.unwrap()));
    }
}

#[test]
fn summarize_is_idempotent_under_duplication() {
    let tmp = TempDir::new().unwrap();
    let g = tmp.path().join("g");
    let mut cfg = small_grid(&g);
    cfg.replicates = 1;
    run_grid(&cfg, false).unwrap();
    let results = g.join(RESULTS_FILE);
    let s1 = tmp.path().join("s1");
    let report = run_summarize(&SummarizeConfig {
        results: Some(results.clone()),
        output: Some(s1.clone()),
    })
    .unwrap();
    assert_eq!(report.plots.len(), 2);
    let freqs = fs::read_to_string(s1.join(FREQUENCIES_FILE)).unwrap();
    for line in freqs.lines().skip(1) {
        let f: f64 = line.split(',').nth(10).unwrap().parse().unwrap();
        assert!(f == 0.0 || f == 1.0);
    }

    let text = fs::read_to_string(&results).unwrap();
    let body: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    let doubled = tmp.path().join("doubled.csv");
    fs::write(&doubled, format!("{text}{body}")).unwrap();
    let s2 = tmp.path().join("s2");
    let report2 = run_summarize(&SummarizeConfig {
        results: Some(doubled),
        output: Some(s2.clone()),
    })
    .unwrap();
    assert_eq!(report2.duplicates, report.rows);
    assert_eq!(freqs, fs::read_to_string(s2.join(FREQUENCIES_FILE)).unwrap());
    for name in &report.plots {
        let a = fs::read(s1.join(PLOTS_DIR).join(name)).unwrap();
        assert_eq!(a, fs::read(s2.join(PLOTS_DIR).join(name)).unwrap());
    }
}

#[test]
fn summarize_rejects_schema_mismatch() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "method,criterion,selected_h\nmice,aic,3\n").unwrap();
    let err = run_summarize(&SummarizeConfig {
        results: Some(bad),
        output: Some(tmp.path().join("s")),
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn q2_loo_curve_lies_above_aic_at_desk_scale() {
    let tmp = TempDir::new().unwrap();
    let g = tmp.path().join("g");
    let cfg = GridConfig {
        output: Some(g.clone()),
        shapes: vec![[100, 20]],
        proportions: vec![0.05, 0.2, 0.35, 0.5],
        true_components: vec![4],
        mechanisms: vec!["mcar".into()],
        methods: vec!["nipals".into()],
        criteria: vec!["q2_loo".into(), "aic".into()],
        replicates: 30,
        seed: 11,
        ..GridConfig::default()
    };
    run_grid(&cfg, false).unwrap();
    let rows = read_results(&g.join(RESULTS_FILE)).unwrap();
    let freq = |c: Criterion| {
        rows.iter().filter(|r| r.criterion == c && r.correct).count() as f64
            / rows.iter().filter(|r| r.criterion == c).count() as f64
    };
    let (q2, aic) = (freq(Criterion::Q2Loo), freq(Criterion::Aic));
    assert!(q2 > aic, "q2_loo {q2} vs aic {aic}");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plsmiss"))
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let input = toy_csv(tmp.path(), 20, 4, 0.3, &[], 8);
    let ok = bin()
        .args(["fit", "--components", "2", "--input"])
        .arg(&input)
        .arg("-o")
        .arg(tmp.path().join("f"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let missing = bin().args(["fit", "--input", "/nonexistent.csv", "-o"]).arg(tmp.path()).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "input = \"x.csv\"\ncomponentz = 2\n").unwrap();
    let config = bin().args(["fit", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(config.status.code(), Some(2));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "a,y\n1,2\nfoo,3\n").unwrap();
    let data = bin().args(["fit", "--input"]).arg(&bad).arg("-o").arg(tmp.path().join("g")).output().unwrap();
    assert_eq!(data.status.code(), Some(3));

    let constant = tmp.path().join("constant.csv");
    fs::write(&constant, "a,b,y\n1,2,1\n1,3,2\n1,4,3\n1,5,4\n").unwrap();
    let zero_variance = bin().args(["fit", "--input"]).arg(&constant).arg("-o").arg(tmp.path().join("h")).output().unwrap();
    assert_eq!(zero_variance.status.code(), Some(3));
}
