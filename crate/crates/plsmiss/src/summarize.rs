//! Correct-selection frequencies per cell and the plots drawn from them.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::Path;

use plsmiss_core::selection::{Criterion, CvMode};
use plsmiss_core::simulate::{Mechanism, Method};

use crate::config::{self, SummarizeConfig};
use crate::csv_io::{csv_io_error, fmt_f64, write_text};
use crate::error::{CliError, Result};
use crate::results::{read_results, ResultRow};
use crate::svg::{self, Panel, Series};

pub const FREQUENCIES_FILE: &str = "frequencies.csv";
pub const PLOTS_DIR: &str = "plots";

pub const FREQUENCY_COLUMNS: [&str; 13] = [
    "method",
    "criterion",
    "cv_mode",
    "mechanism",
    "n",
    "p",
    "true_h",
    "d",
    "replicates",
    "correct",
    "frequency",
    "errors",
    "mean_selected_h",
];

/// Aggregate of one method × criterion × cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequency {
    pub method: Method,
    pub criterion: Criterion,
    pub cv_mode: Option<CvMode>,
    pub mechanism: Mechanism,
    pub n: usize,
    pub p: usize,
    pub true_h: usize,
    pub d: f64,
    pub replicates: usize,
    pub correct: usize,
    pub errors: usize,
    /// Over replicates that selected a count.
    pub mean_selected_h: Option<f64>,
}

impl Frequency {
    /// Correct selections over all replicates; failures count as incorrect.
    pub fn frequency(&self) -> f64 {
        self.correct as f64 / self.replicates as f64
    }
}

type Lines = BTreeMap<(Criterion, Option<CvMode>), Vec<(f64, f64)>>;

type GroupKey = (usize, usize, usize, Mechanism, Method, Criterion, Option<CvMode>, u64);

/// Drops exact duplicates (same key, same content). Conflicting rows for
/// the same key are an error.
pub fn dedupe(rows: Vec<ResultRow>) -> Result<Vec<ResultRow>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        match seen.entry(row.key()) {
            Entry::Vacant(e) => {
                e.insert(out.len());
                out.push(row);
            }
            Entry::Occupied(e) => {
                if out[*e.get()] != row {
                    return Err(CliError::Data(format!(
                        "conflicting rows for {} {} replicate {} (n={}, p={}, d={})",
                        row.method.name(),
                        row.criterion.name(),
                        row.replicate,
                        row.n,
                        row.p,
                        row.d
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Frequencies sorted by shape, true count, mechanism, method, criterion
/// and proportion.
pub fn frequencies(rows: &[ResultRow]) -> Vec<Frequency> {
    let mut groups: BTreeMap<GroupKey, Frequency> = BTreeMap::new();
    let mut selected_sums: BTreeMap<GroupKey, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let key = (r.n, r.p, r.true_h, r.mechanism, r.method, r.criterion, r.cv_mode, r.d.to_bits());
        let f = groups.entry(key).or_insert_with(|| Frequency {
            method: r.method,
            criterion: r.criterion,
            cv_mode: r.cv_mode,
            mechanism: r.mechanism,
            n: r.n,
            p: r.p,
            true_h: r.true_h,
            d: r.d,
            replicates: 0,
            correct: 0,
            errors: 0,
            mean_selected_h: None,
        });
        f.replicates += 1;
        f.correct += usize::from(r.correct);
        f.errors += usize::from(r.error.is_some());
        if let Some(h) = r.selected_h {
            let s = selected_sums.entry(key).or_insert((0.0, 0));
            s.0 += h as f64;
            s.1 += 1;
        }
    }
    groups
        .into_iter()
        .map(|(key, mut f)| {
            f.mean_selected_h = selected_sums.get(&key).map(|&(s, c)| s / c as f64);
            f
        })
        .collect()
}

pub fn write_frequencies(path: &Path, freqs: &[Frequency]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io_error(path, e))?;
    w.write_record(FREQUENCY_COLUMNS).map_err(|e| csv_io_error(path, e))?;
    for f in freqs {
        w.write_record([
            f.method.name().to_owned(),
            f.criterion.name().to_owned(),
            f.cv_mode.map(|m| m.name().to_owned()).unwrap_or_default(),
            f.mechanism.name().to_owned(),
            f.n.to_string(),
            f.p.to_string(),
            f.true_h.to_string(),
            fmt_f64(f.d),
            f.replicates.to_string(),
            f.correct.to_string(),
            fmt_f64(f.frequency()),
            f.errors.to_string(),
            f.mean_selected_h.map(fmt_f64).unwrap_or_default(),
        ])
        .map_err(|e| csv_io_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// File name of the plot for one cell family.
pub fn plot_name(n: usize, p: usize, true_h: usize, mechanism: Mechanism) -> String {
    format!("n{n}_p{p}_h{true_h}_{}.svg", mechanism.name())
}

fn series_label(c: Criterion, mode: Option<CvMode>) -> String {
    match mode {
        Some(CvMode::Adaptative) => format!("{} (adaptative)", c.name()),
        _ => c.name().to_owned(),
    }
}

/// One SVG per (n, p, true_h, mechanism): a panel per method, a line per
/// criterion, frequency against missing proportion.
pub fn plots(freqs: &[Frequency]) -> Vec<(String, String)> {
    let mut families: BTreeMap<(usize, usize, usize, Mechanism), BTreeMap<Method, Lines>> = BTreeMap::new();
    for f in freqs {
        families
            .entry((f.n, f.p, f.true_h, f.mechanism))
            .or_default()
            .entry(f.method)
            .or_default()
            .entry((f.criterion, f.cv_mode))
            .or_default()
            .push((f.d, f.frequency()));
    }
    families
        .into_iter()
        .map(|((n, p, h, mech), methods)| {
            let panels: Vec<Panel> = methods
                .into_iter()
                .map(|(method, lines)| Panel {
                    title: method.name().to_owned(),
                    series: lines
                        .into_iter()
                        .map(|((c, mode), points)| Series {
                            label: series_label(c, mode),
                            points,
                        })
                        .collect(),
                })
                .collect();
            let title = format!("n = {n}, p = {p}, true h = {h}, {}", mech.name().to_uppercase());
            (plot_name(n, p, h, mech), svg::render(&title, &panels))
        })
        .collect()
}

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryReport {
    pub rows: usize,
    pub duplicates: usize,
    pub groups: usize,
    pub plots: Vec<String>,
}

pub fn run_summarize(cfg: &SummarizeConfig) -> Result<SummaryReport> {
    cfg.validate()?;
    let rows = read_results(cfg.results()?)?;
    let total = rows.len();
    let rows = dedupe(rows)?;
    let dir = cfg.output()?;
    config::write_resolved(dir, cfg)?;
    let freqs = frequencies(&rows);
    write_frequencies(&dir.join(FREQUENCIES_FILE), &freqs)?;
    let plot_dir = dir.join(PLOTS_DIR);
    std::fs::create_dir_all(&plot_dir).map_err(|e| CliError::io(&plot_dir, e))?;
    let mut names = Vec::new();
    for (name, text) in plots(&freqs) {
        write_text(&plot_dir.join(&name), &text)?;
        names.push(name);
    }
    Ok(SummaryReport {
        rows: rows.len(),
        duplicates: total - rows.len(),
        groups: freqs.len(),
        plots: names,
    })
}
