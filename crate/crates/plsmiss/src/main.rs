use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plsmiss::commands::{self, format_selection};
use plsmiss::config::{self, FitConfig, GridConfig, ImputeConfig, PredictConfig, SelectConfig, SummarizeConfig};
use plsmiss::{grid, summarize, Result};
use serde::de::DeserializeOwned;

/// PLS1 component selection with missing data.
#[derive(Debug, Parser)]
#[command(name = "plsmiss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a PLS1 model to a CSV and write the model and an RSS report.
    Fit(FitArgs),
    /// Predict a CSV with a saved model.
    Predict(PredictArgs),
    /// Evaluate selection criteria on a CSV.
    Select(SelectArgs),
    /// Impute missing cells of a CSV.
    Impute(ImputeArgs),
    /// Run the simulation grid.
    Grid(GridArgs),
    /// Aggregate a results CSV into frequencies and plots.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// TOML config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Response column (default: last).
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    components: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// `regular` or `missing`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    components: Option<usize>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated: q2_loo, q2_kfold, aic, aic_dof, bic, bic_dof.
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<String>>,
    #[arg(long)]
    h_max: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// `standard` or `adaptative`.
    #[arg(long)]
    cv_mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ImputeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// `mice`, `knn` or `svd`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    neighbours: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "full")]
    replicates: Option<usize>,
    /// 1000 replicates per cell.
    #[arg(long)]
    full: bool,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated criterion names.
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<String>>,
    #[arg(long)]
    cv_mode: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// No per-cell progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Results CSV written by `grid`.
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn base<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => config::load(p),
        None => Ok(T::default()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let mut c: FitConfig = base(&a.config)?;
            set_opt(&mut c.input, a.input);
            set_opt(&mut c.output, a.output);
            set_opt(&mut c.response, a.response);
            set(&mut c.components, a.components);
            let r = commands::run_fit(&c)?;
            println!("n={} p={} components={}", r.n, r.p, r.components);
            if let Some(k) = r.degenerate_at {
                println!("extraction stopped: component {k} degenerate");
            }
            for (h, rss) in r.rss.iter().enumerate() {
                println!("h={h} rss={rss:.6}");
            }
        }
        Command::Predict(a) => {
            let mut c: PredictConfig = base(&a.config)?;
            set_opt(&mut c.model, a.model);
            set_opt(&mut c.input, a.input);
            set_opt(&mut c.output, a.output);
            set(&mut c.mode, a.mode);
            set_opt(&mut c.components, a.components);
            let r = commands::run_predict(&c)?;
            println!("predicted {} rows", r.rows);
        }
        Command::Select(a) => {
            let mut c: SelectConfig = base(&a.config)?;
            set_opt(&mut c.input, a.input);
            set_opt(&mut c.output, a.output);
            set_opt(&mut c.response, a.response);
            set(&mut c.criteria, a.criteria);
            set(&mut c.h_max, a.h_max);
            set(&mut c.folds, a.folds);
            set(&mut c.cv_mode, a.cv_mode);
            set(&mut c.seed, a.seed);
            let traces = commands::run_select(&c)?;
            print!("{}", format_selection(&traces));
        }
        Command::Impute(a) => {
            let mut c: ImputeConfig = base(&a.config)?;
            set_opt(&mut c.input, a.input);
            set_opt(&mut c.output, a.output);
            set(&mut c.method, a.method);
            set_opt(&mut c.m, a.m);
            set(&mut c.neighbours, a.neighbours);
            set_opt(&mut c.rank, a.rank);
            set(&mut c.seed, a.seed);
            let set = commands::run_impute(&c)?;
            println!("wrote {} imputed dataset(s)", set.m());
        }
        Command::Grid(a) => {
            let mut c: GridConfig = base(&a.config)?;
            set_opt(&mut c.output, a.output);
            set(&mut c.seed, a.seed);
            set(&mut c.replicates, a.replicates);
            if a.full {
                c.replicates = config::FULL_REPLICATES;
            }
            set(&mut c.methods, a.methods);
            set(&mut c.criteria, a.criteria);
            set(&mut c.cv_mode, a.cv_mode);
            set_opt(&mut c.threads, a.threads);
            let r = grid::run_grid(&c, !a.quiet)?;
            println!("{} cells, {} rows, {} errors", r.cells, r.rows, r.errors);
        }
        Command::Summarize(a) => {
            let mut c: SummarizeConfig = base(&a.config)?;
            set_opt(&mut c.results, a.results);
            set_opt(&mut c.output, a.output);
            let r = summarize::run_summarize(&c)?;
            println!(
                "{} rows ({} duplicates dropped), {} groups, {} plots",
                r.rows,
                r.duplicates,
                r.groups,
                r.plots.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plsmiss: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
