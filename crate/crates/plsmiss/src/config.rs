//! Run configurations. Each command reads an optional TOML file, command
//! line flags override it, and the resolved configuration is written as
//! `config.toml` next to the outputs.

use std::path::{Path, PathBuf};

use plsmiss_core::impute::{DEFAULT_CYCLES, DEFAULT_NEIGHBOURS, DEFAULT_SVD_MAX_ITER, DEFAULT_SVD_TOLERANCE};
use plsmiss_core::selection::{Criterion, CvMode, DEFAULT_FOLDS};
use plsmiss_core::simulate::{
    Mechanism, Method, PipelineSettings, DEFAULT_DECAY, DEFAULT_MAR_SLOPE, DEFAULT_NOISE, DEFAULT_X_NOISE, H_MAX,
    PROPORTIONS, SHAPES, TRUE_COMPONENTS,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::csv_io::write_text;
use crate::error::{CliError, Result};

pub const RESOLVED_CONFIG: &str = "config.toml";
pub const DEFAULT_REPLICATES: usize = 100;
pub const FULL_REPLICATES: usize = 1000;
pub const DEFAULT_SEED: u64 = 20240917;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| CliError::Config(e.message().to_owned()))
}

/// Writes the resolved configuration into `dir`, creating it if needed.
pub fn write_resolved<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let text = toml::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(&dir.join(RESOLVED_CONFIG), &text)
}

fn required<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| CliError::Config(format!("`{key}` is required")))
}

pub fn parse_criteria(names: &[String]) -> Result<Vec<Criterion>> {
    if names.is_empty() {
        return Err(CliError::Config("no criteria given".into()));
    }
    names
        .iter()
        .map(|n| Criterion::from_name(n).ok_or_else(|| CliError::Config(format!("unknown criterion {n:?}"))))
        .collect()
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    if names.is_empty() {
        return Err(CliError::Config("no methods given".into()));
    }
    names
        .iter()
        .map(|n| Method::from_name(n).ok_or_else(|| CliError::Config(format!("unknown method {n:?}"))))
        .collect()
}

pub fn parse_mechanisms(names: &[String]) -> Result<Vec<Mechanism>> {
    if names.is_empty() {
        return Err(CliError::Config("no mechanisms given".into()));
    }
    names
        .iter()
        .map(|n| Mechanism::from_name(n).ok_or_else(|| CliError::Config(format!("unknown mechanism {n:?}"))))
        .collect()
}

pub fn parse_cv_mode(name: &str) -> Result<CvMode> {
    CvMode::from_name(name).ok_or_else(|| CliError::Config(format!("unknown cv_mode {name:?}")))
}

fn all_criteria() -> Vec<String> {
    Criterion::ALL.iter().map(|c| c.name().to_owned()).collect()
}

fn default_cv_mode() -> String {
    CvMode::Standard.name().to_owned()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Response column; the last column when absent.
    pub response: Option<String>,
    pub components: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            input: None,
            output: None,
            response: None,
            components: H_MAX,
        }
    }
}

impl FitConfig {
    pub fn input(&self) -> Result<&Path> {
        required(&self.input, "input").map(PathBuf::as_path)
    }

    pub fn output(&self) -> Result<&Path> {
        required(&self.output, "output").map(PathBuf::as_path)
    }

    pub fn validate(&self) -> Result<()> {
        self.input()?;
        self.output()?;
        if self.components == 0 {
            return Err(CliError::Config("`components` must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub model: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// `regular` or `missing`.
    pub mode: String,
    /// Components used; every count when absent.
    pub components: Option<usize>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            model: None,
            input: None,
            output: None,
            mode: "regular".into(),
            components: None,
        }
    }
}

impl PredictConfig {
    pub fn model(&self) -> Result<&Path> {
        required(&self.model, "model").map(PathBuf::as_path)
    }

    pub fn input(&self) -> Result<&Path> {
        required(&self.input, "input").map(PathBuf::as_path)
    }

    pub fn output(&self) -> Result<&Path> {
        required(&self.output, "output").map(PathBuf::as_path)
    }

    pub fn prediction_mode(&self) -> Result<plsmiss_core::PredictionMode> {
        match self.mode.as_str() {
            "regular" => Ok(plsmiss_core::PredictionMode::Regular),
            "missing" => Ok(plsmiss_core::PredictionMode::MissingSpecific),
            other => Err(CliError::Config(format!("unknown prediction mode {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.input()?;
        self.output()?;
        self.prediction_mode()?;
        if self.components == Some(0) {
            return Err(CliError::Config("`components` must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub response: Option<String>,
    pub criteria: Vec<String>,
    pub h_max: usize,
    pub folds: usize,
    pub cv_mode: String,
    pub seed: u64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            input: None,
            output: None,
            response: None,
            criteria: all_criteria(),
            h_max: H_MAX,
            folds: DEFAULT_FOLDS,
            cv_mode: default_cv_mode(),
            seed: DEFAULT_SEED,
        }
    }
}

impl SelectConfig {
    pub fn input(&self) -> Result<&Path> {
        required(&self.input, "input").map(PathBuf::as_path)
    }

    pub fn output(&self) -> Result<&Path> {
        required(&self.output, "output").map(PathBuf::as_path)
    }

    pub fn validate(&self) -> Result<()> {
        self.input()?;
        self.output()?;
        parse_criteria(&self.criteria)?;
        parse_cv_mode(&self.cv_mode)?;
        if self.h_max == 0 {
            return Err(CliError::Config("`h_max` must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(CliError::Config("`folds` must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// `mice`, `knn` or `svd`.
    pub method: String,
    /// MICE imputations; from the missing proportion when absent.
    pub m: Option<usize>,
    pub cycles: usize,
    pub neighbours: usize,
    /// SVD rank; chosen from the singular value elbow when absent.
    pub rank: Option<usize>,
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            input: None,
            output: None,
            method: "mice".into(),
            m: None,
            cycles: DEFAULT_CYCLES,
            neighbours: DEFAULT_NEIGHBOURS,
            rank: None,
            tolerance: DEFAULT_SVD_TOLERANCE,
            max_iter: DEFAULT_SVD_MAX_ITER,
            seed: DEFAULT_SEED,
        }
    }
}

impl ImputeConfig {
    pub fn input(&self) -> Result<&Path> {
        required(&self.input, "input").map(PathBuf::as_path)
    }

    pub fn output(&self) -> Result<&Path> {
        required(&self.output, "output").map(PathBuf::as_path)
    }

    pub fn validate(&self) -> Result<()> {
        self.input()?;
        self.output()?;
        if !matches!(self.method.as_str(), "mice" | "knn" | "svd") {
            return Err(CliError::Config(format!("unknown imputation method {:?}", self.method)));
        }
        if self.m == Some(0) || self.cycles == 0 || self.neighbours == 0 || self.max_iter == 0 {
            return Err(CliError::Config("`m`, `cycles`, `neighbours` and `max_iter` must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(CliError::Config("`tolerance` must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub replicates: usize,
    /// `[n, p]` pairs.
    pub shapes: Vec<[usize; 2]>,
    pub proportions: Vec<f64>,
    pub true_components: Vec<usize>,
    pub mechanisms: Vec<String>,
    pub methods: Vec<String>,
    pub criteria: Vec<String>,
    pub h_max: usize,
    pub folds: usize,
    pub cv_mode: String,
    pub noise: f64,
    pub x_noise: f64,
    pub decay: f64,
    pub mar_driver: usize,
    pub mar_slope: f64,
    pub mice_cycles: usize,
    pub knn_neighbours: usize,
    /// SVD imputation rank; the true component count when absent.
    pub svd_rank: Option<usize>,
    pub svd_tolerance: f64,
    pub svd_max_iter: usize,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            output: None,
            seed: DEFAULT_SEED,
            replicates: DEFAULT_REPLICATES,
            shapes: SHAPES.iter().map(|&(n, p)| [n, p]).collect(),
            proportions: PROPORTIONS.to_vec(),
            true_components: TRUE_COMPONENTS.to_vec(),
            mechanisms: vec!["mcar".into(), "mar".into()],
            methods: Method::ALL.iter().map(|m| m.name().to_owned()).collect(),
            criteria: all_criteria(),
            h_max: H_MAX,
            folds: DEFAULT_FOLDS,
            cv_mode: default_cv_mode(),
            noise: DEFAULT_NOISE,
            x_noise: DEFAULT_X_NOISE,
            decay: DEFAULT_DECAY,
            mar_driver: 0,
            mar_slope: DEFAULT_MAR_SLOPE,
            mice_cycles: DEFAULT_CYCLES,
            knn_neighbours: DEFAULT_NEIGHBOURS,
            svd_rank: None,
            svd_tolerance: DEFAULT_SVD_TOLERANCE,
            svd_max_iter: DEFAULT_SVD_MAX_ITER,
            threads: None,
        }
    }
}

impl GridConfig {
    pub fn output(&self) -> Result<&Path> {
        required(&self.output, "output").map(PathBuf::as_path)
    }

    pub fn settings(&self) -> Result<PipelineSettings> {
        Ok(PipelineSettings {
            h_max: self.h_max,
            folds: self.folds,
            cv_mode: parse_cv_mode(&self.cv_mode)?,
            mice_cycles: self.mice_cycles,
            knn_neighbours: self.knn_neighbours,
            svd_rank: self.svd_rank,
            svd_tolerance: self.svd_tolerance,
            svd_max_iter: self.svd_max_iter,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.output()?;
        parse_methods(&self.methods)?;
        parse_criteria(&self.criteria)?;
        parse_mechanisms(&self.mechanisms)?;
        self.settings()?;
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.replicates == 0 {
            return fail("`replicates` must be at least 1".into());
        }
        if self.shapes.is_empty() || self.proportions.is_empty() || self.true_components.is_empty() {
            return fail("`shapes`, `proportions` and `true_components` must not be empty".into());
        }
        if let Some(&d) = self.proportions.iter().find(|d| !(0.0..=0.5).contains(*d)) {
            return fail(format!("proportion {d} outside [0, 0.5]"));
        }
        for &[n, p] in &self.shapes {
            if n < 4 || p < 2 {
                return fail(format!("shape [{n}, {p}] too small"));
            }
            if self.mar_driver >= p {
                return fail(format!("`mar_driver` {} out of range for p = {p}", self.mar_driver));
            }
            if let Some(&h) = self.true_components.iter().find(|&&h| h == 0 || h >= n.min(p)) {
                return fail(format!("true_components {h} invalid for shape [{n}, {p}]"));
            }
        }
        if self.h_max == 0 || self.folds < 2 || self.mice_cycles == 0 || self.knn_neighbours == 0 {
            return fail("`h_max`, `mice_cycles` and `knn_neighbours` must be positive and `folds` at least 2".into());
        }
        if !(self.noise >= 0.0 && self.x_noise >= 0.0 && self.decay > 0.0 && self.mar_slope.is_finite()) {
            return fail("`noise`, `x_noise` must be non-negative, `decay` positive, `mar_slope` finite".into());
        }
        if self.threads == Some(0) {
            return fail("`threads` must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeConfig {
    pub results: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl SummarizeConfig {
    pub fn results(&self) -> Result<&Path> {
        required(&self.results, "results").map(PathBuf::as_path)
    }

    pub fn output(&self) -> Result<&Path> {
        required(&self.output, "output").map(PathBuf::as_path)
    }

    pub fn validate(&self) -> Result<()> {
        self.results()?;
        self.output()?;
        Ok(())
    }
}
