//! Single-dataset commands: fit, predict, select, impute.

use std::fmt::Write as _;

use plsmiss_core::impute::{
    choose_svd_rank, impute_knn, impute_mice_norm, impute_svd, imputations_for_proportion, ImputedSet,
};
use plsmiss_core::selection::{evaluate, CriterionTrace, SelectionSettings};
use plsmiss_core::{plsr, MaskedMatrix, SeededRng};

use crate::config::{self, FitConfig, ImputeConfig, PredictConfig, SelectConfig};
use crate::csv_io::{csv_io_error, fmt_f64, read_table, write_matrix, write_text};
use crate::error::{CliError, Result};
use crate::model_io::{self, SavedModel};

pub const MODEL_FILE: &str = "model.txt";
pub const FIT_REPORT_FILE: &str = "fit_report.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const TRACES_FILE: &str = "criteria.csv";
pub const SELECTED_FILE: &str = "selected.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub n: usize,
    pub p: usize,
    pub components: usize,
    pub degenerate_at: Option<usize>,
    /// `RSS_h` for `h = 0..=H`, standardized units.
    pub rss: Vec<f64>,
}

pub fn run_fit(cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let data = read_table(cfg.input()?)?.into_dataset(cfg.response.as_deref())?;
    let (n, p) = (data.x.rows(), data.x.cols());
    let h = cfg.components.min(plsr::max_components(n, p));
    if h == 0 {
        return Err(CliError::Data(format!("{n} rows are too few to fit a component")));
    }
    let model = plsr::fit(&data.x, &data.y, h)?;
    let rss = plsr::rss_trace(&model, &data.y)?;
    let dir = cfg.output()?;
    config::write_resolved(dir, cfg)?;

    let mut report = String::from("h,rss,r2\n");
    for (k, r) in rss.iter().enumerate() {
        let _ = writeln!(report, "{k},{},{}", fmt_f64(*r), fmt_f64(1.0 - r / rss[0]));
    }
    write_text(&dir.join(FIT_REPORT_FILE), &report)?;
    let out = FitReport {
        n,
        p,
        components: model.n_components(),
        degenerate_at: model.degenerate_at,
        rss,
    };
    model_io::save(
        &dir.join(MODEL_FILE),
        &SavedModel {
            response: data.response,
            features: data.features,
            model,
        },
    )?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub rows: usize,
    /// Component counts written, one column each.
    pub components: Vec<usize>,
}

pub fn run_predict(cfg: &PredictConfig) -> Result<PredictReport> {
    cfg.validate()?;
    let saved = model_io::load(cfg.model()?)?;
    let mode = cfg.prediction_mode()?;
    let table = read_table(cfg.input()?)?;
    let rows = table.select_columns(&saved.features)?;
    let max = saved.model.n_components();
    let components: Vec<usize> = match cfg.components {
        Some(h) if h > max => {
            return Err(CliError::Config(format!("model has {max} components, {h} requested")));
        }
        Some(h) => vec![h],
        None => (1..=max).collect(),
    };
    let dir = cfg.output()?;
    config::write_resolved(dir, cfg)?;
    let path = dir.join(PREDICTIONS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io_error(&path, e))?;
    let mut header = vec!["row".to_owned()];
    header.extend(components.iter().map(|h| format!("h{h}")));
    w.write_record(&header).map_err(|e| csv_io_error(&path, e))?;
    for (i, row) in rows.iter().enumerate() {
        let all = saved
            .model
            .predict_all(row, mode)
            .map_err(|e| CliError::Data(format!("row {}: {e}", i + 1)))?;
        let mut record = vec![(i + 1).to_string()];
        record.extend(components.iter().map(|&h| fmt_f64(all[h - 1])));
        w.write_record(&record).map_err(|e| csv_io_error(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(PredictReport {
        rows: rows.len(),
        components,
    })
}

fn opt_at(values: &[f64], k: Option<usize>) -> String {
    k.and_then(|k| values.get(k)).map(|&v| fmt_f64(v)).unwrap_or_default()
}

/// Per-h rows of every trace: criterion, cv_mode, h, value, press, rss, dof.
pub fn render_traces(traces: &[CriterionTrace]) -> String {
    let mut out = String::from("criterion,cv_mode,h,value,press,rss,dof\n");
    for t in traces {
        let mode = t.cv_mode.map(|m| m.name()).unwrap_or_default();
        for (k, v) in t.values.iter().enumerate() {
            let h = t.first_h + k;
            let _ = writeln!(
                out,
                "{},{mode},{h},{},{},{},{}",
                t.criterion.name(),
                fmt_f64(*v),
                opt_at(&t.press, h.checked_sub(1)),
                opt_at(&t.rss, Some(h)),
                opt_at(&t.dof, Some(h)),
            );
        }
    }
    out
}

pub fn run_select(cfg: &SelectConfig) -> Result<Vec<CriterionTrace>> {
    cfg.validate()?;
    let data = read_table(cfg.input()?)?.into_dataset(cfg.response.as_deref())?;
    let criteria = config::parse_criteria(&cfg.criteria)?;
    let settings = SelectionSettings {
        h_max: cfg.h_max,
        folds: cfg.folds,
        cv_mode: config::parse_cv_mode(&cfg.cv_mode)?,
    };
    let traces = evaluate(&data.x, &data.y, &criteria, &settings, &SeededRng::new(cfg.seed, 0))?
        .into_iter()
        .collect::<plsmiss_core::Result<Vec<_>>>()?;
    let dir = cfg.output()?;
    config::write_resolved(dir, cfg)?;
    write_text(&dir.join(TRACES_FILE), &render_traces(&traces))?;
    let mut selected = String::from("criterion,cv_mode,selected_h,dof_fallback\n");
    for t in &traces {
        let _ = writeln!(
            selected,
            "{},{},{},{}",
            t.criterion.name(),
            t.cv_mode.map(|m| m.name()).unwrap_or_default(),
            t.selected_h,
            u8::from(t.dof_fallback)
        );
    }
    write_text(&dir.join(SELECTED_FILE), &selected)?;
    Ok(traces)
}

/// Name of the `k`-th (one-based) imputed dataset file.
pub fn imputed_name(k: usize) -> String {
    format!("imputed_{k}.csv")
}

pub fn run_impute(cfg: &ImputeConfig) -> Result<ImputedSet> {
    cfg.validate()?;
    let table = read_table(cfg.input()?)?;
    let x = MaskedMatrix::from_options(&table.rows)?;
    let set = match cfg.method.as_str() {
        "mice" => {
            let m = cfg.m.unwrap_or_else(|| imputations_for_proportion(x.missing_proportion()));
            impute_mice_norm(&x, m, cfg.cycles, &SeededRng::new(cfg.seed, 0))?
        }
        "knn" => impute_knn(&x, cfg.neighbours)?,
        _ => {
            let k = cfg.rank.unwrap_or_else(|| choose_svd_rank(&x));
            impute_svd(&x, k, cfg.tolerance, cfg.max_iter)?
        }
    };
    let dir = cfg.output()?;
    config::write_resolved(dir, cfg)?;
    for (k, d) in set.datasets.iter().enumerate() {
        write_matrix(&dir.join(imputed_name(k + 1)), &table.headers, d)?;
    }
    Ok(set)
}

/// Prints a criterion table to a string for the terminal.
pub fn format_selection(traces: &[CriterionTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        let _ = write!(out, "{:<10}", t.criterion.name());
        for (k, v) in t.values.iter().enumerate() {
            let _ = write!(out, " h{}={:<10.4}", t.first_h + k, v);
        }
        let _ = writeln!(
            out,
            " selected_h={}{}",
            t.selected_h,
            if t.dof_fallback { " (naive dof fallback)" } else { "" }
        );
    }
    out
}
