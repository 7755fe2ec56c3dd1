//! Experiment manifests: one flat `key = value` file per run.
//!
//! Values use TOML syntax (`3`, `0.5`, `"tnsrkf"`, `[1, 4, 4, 1]`). A
//! `--set key=value` override is parsed the same way and falls back to a
//! bare string. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features::LagConfig;
use crate::tensor::{uniform_ranks, SweepOrder};

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    #[default]
    Tnsrkf,
    Tnkf,
    DenseKf,
    DenseSrkf,
}

impl FilterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Tnsrkf => "tnsrkf",
            FilterKind::Tnkf => "tnkf",
            FilterKind::DenseKf => "dense_kf",
            FilterKind::DenseSrkf => "dense_srkf",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Samples from the reduced-rank SE prior.
    #[default]
    Gp,
    /// Truncated Volterra system with train-format weights.
    Volterra,
    /// Cascaded-tanks CSV at `data_path`.
    Tanks,
    /// Simulated two-tank system in the same format.
    TanksSim,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrderConfig {
    #[default]
    LeftToRight,
    RightToLeft,
    Alternating,
}

impl From<SweepOrderConfig> for SweepOrder {
    fn from(v: SweepOrderConfig) -> Self {
        match v {
            SweepOrderConfig::LeftToRight => SweepOrder::LeftToRight,
            SweepOrderConfig::RightToLeft => SweepOrder::RightToLeft,
            SweepOrderConfig::Alternating => SweepOrder::Alternating,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub filter: FilterKind,
    pub dataset: DatasetKind,
    pub data_path: Option<PathBuf>,

    /// Input dimension; derived from the lags for tank data.
    pub dims: usize,
    /// Basis functions per dimension.
    pub basis: usize,
    pub n_train: usize,
    pub n_test: usize,

    pub lengthscale: f64,
    pub signal_variance: f64,
    pub half_width: f64,
    /// GP inputs are drawn uniformly from `[-input_range, input_range]^D`.
    pub input_range: f64,
    /// Noise variance used to generate GP data.
    pub data_noise_var: f64,

    pub snr_db: f64,
    /// Interior rank of the generating Volterra weights.
    pub weight_rank: usize,
    pub lambda: f64,

    pub input_lags: Vec<usize>,
    pub output_lags: Vec<usize>,

    /// Filter noise variance; unset means the dataset's own value.
    pub noise_var: Option<f64>,
    pub mean_rank: usize,
    pub sqrt_rank: usize,
    pub cov_rank: usize,
    pub mean_ranks: Option<Vec<usize>>,
    pub sqrt_ranks: Option<Vec<usize>>,
    pub cov_ranks: Option<Vec<usize>>,
    pub rel_tol: f64,
    pub qr_budget: Option<u32>,
    pub aug_site: Option<usize>,
    pub max_sweeps: usize,
    pub residual_tol: f64,
    pub sweep_order: SweepOrderConfig,

    pub eval_every: usize,
    pub seed: u64,
    /// Dataset seed; unset means `seed`.
    pub data_seed: Option<u64>,
    pub max_steps: Option<usize>,

    pub record_min_eig: bool,
    /// Off by default so reruns produce byte-identical files.
    pub record_timing: bool,
    pub plot: bool,
    /// Add the noise variance to the predictive variance in the NLL.
    pub nll_include_noise: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lags = LagConfig::default();
        Self {
            name: None,
            filter: FilterKind::Tnsrkf,
            dataset: DatasetKind::Gp,
            data_path: None,
            dims: 3,
            basis: 4,
            n_train: 100,
            n_test: 100,
            lengthscale: 0.5,
            signal_variance: 1.0,
            half_width: 1.5,
            input_range: 1.0,
            data_noise_var: 0.01,
            snr_db: 60.0,
            weight_rank: 2,
            lambda: 1.0,
            input_lags: lags.input_lags,
            output_lags: lags.output_lags,
            noise_var: None,
            mean_rank: 4,
            sqrt_rank: 4,
            cov_rank: 4,
            mean_ranks: None,
            sqrt_ranks: None,
            cov_ranks: None,
            rel_tol: 0.0,
            qr_budget: None,
            aug_site: None,
            max_sweeps: 1,
            residual_tol: 1e-8,
            sweep_order: SweepOrderConfig::LeftToRight,
            eval_every: 10,
            seed: 0,
            data_seed: None,
            max_steps: None,
            record_min_eig: false,
            record_timing: false,
            plot: false,
            nll_include_noise: true,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lags(&self) -> LagConfig {
        LagConfig {
            input_lags: self.input_lags.clone(),
            output_lags: self.output_lags.clone(),
        }
    }

    /// Input dimension actually used.
    pub fn effective_dims(&self) -> usize {
        match self.dataset {
            DatasetKind::Tanks | DatasetKind::TanksSim => self.lags().dims(),
            _ => self.dims,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    fn rank_vector(&self, explicit: &Option<Vec<usize>>, uniform: usize, key: &str) -> Result<Vec<usize>> {
        let d = self.effective_dims();
        match explicit {
            Some(v) => {
                if v.len() != d + 1 || v[0] != 1 || v[d] != 1 || v.contains(&0) {
                    return Err(Error::Config(format!(
                        "{key} must have {} positive entries with unit ends, got {v:?}",
                        d + 1
                    )));
                }
                Ok(v.clone())
            }
            None => Ok(uniform_ranks(d, uniform)),
        }
    }

    pub fn mean_rank_vector(&self) -> Result<Vec<usize>> {
        self.rank_vector(&self.mean_ranks, self.mean_rank, "mean_ranks")
    }

    pub fn sqrt_rank_vector(&self) -> Result<Vec<usize>> {
        self.rank_vector(&self.sqrt_ranks, self.sqrt_rank, "sqrt_ranks")
    }

    pub fn cov_rank_vector(&self) -> Result<Vec<usize>> {
        self.rank_vector(&self.cov_ranks, self.cov_rank, "cov_ranks")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.effective_dims() == 0 || self.basis == 0 {
            return bad("dims and basis must be positive");
        }
        if self.n_train == 0 {
            return bad("n_train must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if self.mean_rank == 0 || self.sqrt_rank == 0 || self.cov_rank == 0 {
            return bad("ranks must be positive");
        }
        if !(self.lengthscale > 0.0 && self.half_width > 0.0 && self.input_range > 0.0) {
            return bad("lengthscale, half_width and input_range must be positive");
        }
        if self.input_range > self.half_width {
            return bad("input_range must not exceed half_width");
        }
        if self.signal_variance < 0.0 || self.data_noise_var < 0.0 {
            return bad("variances must be nonnegative");
        }
        if let Some(v) = self.noise_var {
            if !(v > 0.0 && v.is_finite()) {
                return bad("noise_var must be positive");
            }
        }
        if self.lambda <= 0.0 {
            return bad("lambda must be positive");
        }
        if self.dataset == DatasetKind::Volterra && self.basis < 2 {
            return bad("Volterra data needs basis >= 2");
        }
        if self.dataset == DatasetKind::Tanks && self.data_path.is_none() {
            return bad("tanks dataset needs data_path");
        }
        if self.qr_budget == Some(0) {
            return bad("qr_budget must be at least 1");
        }
        if let Some(a) = self.aug_site {
            if a >= self.effective_dims() {
                return bad("aug_site out of range");
            }
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be positive");
        }
        self.lags().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.mean_rank_vector()?;
        self.sqrt_rank_vector()?;
        self.cov_rank_vector()?;
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
