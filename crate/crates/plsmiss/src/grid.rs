//! The simulation grid: every cell × replicate, run in parallel and written
//! in a fixed order.

use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use plsmiss_core::simulate::{
    run_replicate_from_seed, Cell, Clock, Mechanism, MissingnessSpec, ReplicateResult, SimSpec,
};
use rayon::prelude::*;

use crate::config::{self, GridConfig};
use crate::csv_io::{csv_io_error, fmt_f64};
use crate::error::{CliError, Result};
use crate::results::{ResultRow, ResultsWriter, TIMING_COLUMNS};

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

/// Wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock {
    origin: Instant,
}

impl Default for StdClock {
    fn default() -> Self {
        StdClock { origin: Instant::now() }
    }
}

impl Clock for StdClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// The cell at given coordinates, with the config's generator and MAR
/// settings.
pub fn make_cell(cfg: &GridConfig, n: usize, p: usize, true_h: usize, mechanism: Mechanism, d: f64) -> Cell {
    let spec = SimSpec {
        noise: cfg.noise,
        x_noise: cfg.x_noise,
        decay: cfg.decay,
        ..SimSpec::new(n, p, true_h)
    };
    let missing = MissingnessSpec {
        mechanism,
        d,
        driver: cfg.mar_driver,
        slope: cfg.mar_slope,
    };
    Cell { spec, missing }
}

/// Cells in output order: shape, true component count, mechanism, proportion.
pub fn cells(cfg: &GridConfig) -> Result<Vec<Cell>> {
    let mechanisms = config::parse_mechanisms(&cfg.mechanisms)?;
    let mut out = Vec::new();
    for &[n, p] in &cfg.shapes {
        for &h in &cfg.true_components {
            for &mech in &mechanisms {
                for &d in &cfg.proportions {
                    out.push(make_cell(cfg, n, p, h, mech, d));
                }
            }
        }
    }
    Ok(out)
}

/// Results rows of one replicate, recomputed from its seed.
pub fn replicate_rows(cfg: &GridConfig, cell: &Cell, seed: u64, replicate: usize, clock: &dyn Clock) -> Result<Vec<ReplicateResult>> {
    let methods = config::parse_methods(&cfg.methods)?;
    let criteria = config::parse_criteria(&cfg.criteria)?;
    let settings = cfg.settings()?;
    Ok(run_replicate_from_seed(cell, seed, replicate, &methods, &criteria, &settings, clock))
}

/// Summary of a finished grid run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridReport {
    pub cells: usize,
    pub rows: usize,
    pub errors: usize,
}

/// Runs the grid and writes `results.csv`, `timings.csv` and the resolved
/// config into the output directory.
pub fn run_grid(cfg: &GridConfig, progress: bool) -> Result<GridReport> {
    cfg.validate()?;
    let dir = cfg.output()?;
    config::write_resolved(dir, cfg)?;
    let cells = cells(cfg)?;
    let cv_mode = cfg.settings()?.cv_mode;
    let methods_n = cfg.methods.len();

    let results_path = dir.join(RESULTS_FILE);
    let file = File::create(&results_path).map_err(|e| CliError::io(&results_path, e))?;
    let mut results = ResultsWriter::new(BufWriter::new(file))?;
    let timings_path = dir.join(TIMINGS_FILE);
    let mut timings = csv::Writer::from_path(&timings_path).map_err(|e| csv_io_error(&timings_path, e))?;
    timings
        .write_record(TIMING_COLUMNS)
        .map_err(|e| csv_io_error(&timings_path, e))?;

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cfg.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| CliError::Config(e.to_string()))?
    };
    let clock = StdClock::default();
    let mut report = GridReport {
        cells: cells.len(),
        rows: 0,
        errors: 0,
    };
    for (k, cell) in cells.iter().enumerate() {
        let per_replicate: Vec<Result<Vec<ReplicateResult>>> = pool.install(|| {
            (0..cfg.replicates)
                .into_par_iter()
                .map(|r| replicate_rows(cfg, cell, cell.replicate_seed(cfg.seed, r), r, &clock))
                .collect()
        });
        for rows in per_replicate {
            let rows = rows?;
            for chunk in rows.chunks(rows.len() / methods_n) {
                let first = &chunk[0];
                timings
                    .write_record([
                        first.method.name().to_owned(),
                        first.mechanism.name().to_owned(),
                        fmt_f64(first.d),
                        first.n.to_string(),
                        first.p.to_string(),
                        first.true_h.to_string(),
                        first.replicate.to_string(),
                        format!("{:.6}", first.elapsed_seconds),
                    ])
                    .map_err(|e| csv_io_error(&timings_path, e))?;
            }
            for r in &rows {
                report.rows += 1;
                report.errors += usize::from(r.error.is_some());
                results
                    .write(&ResultRow::from_result(r, cv_mode))
                    .map_err(|e| CliError::io(&results_path, e))?;
            }
        }
        if progress {
            eprintln!(
                "cell {}/{}: n={} p={} true_h={} {} d={}",
                k + 1,
                cells.len(),
                cell.spec.n,
                cell.spec.p,
                cell.spec.true_h,
                cell.missing.mechanism.name(),
                cell.missing.d
            );
        }
    }
    results.flush().map_err(|e| CliError::io(&results_path, e))?;
    timings.flush().map_err(|e| CliError::io(&timings_path, e))?;
    Ok(report)
}

/// Recomputes the rows recorded for one replicate and renders them as the
/// results file would.
pub fn rerun_rows(cfg: &GridConfig, recorded: &ResultRow) -> Result<Vec<ResultRow>> {
    let cell = make_cell(cfg, recorded.n, recorded.p, recorded.true_h, recorded.mechanism, recorded.d);
    let cv_mode = cfg.settings()?.cv_mode;
    Ok(replicate_rows(cfg, &cell, recorded.seed, recorded.replicate, &plsmiss_core::simulate::NoClock)?
        .iter()
        .map(|r| ResultRow::from_result(r, cv_mode))
        .collect())
}
