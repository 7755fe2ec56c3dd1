//! Streams a dataset through one filter and records test-set metrics.

use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{DatasetKind, ExperimentConfig, FilterKind};
use super::data::{
    embed_tanks, gen_synthetic_gp, gen_volterra, load_tanks_csv, simulate_tanks, Dataset,
};
use super::metrics::{compute_metrics, MetricsRow};
use super::output::{write_metrics_csv, write_plot_svg, write_predictions_csv};
use crate::baselines::{DenseKf, DenseSrkf, Tnkf, TnkfConfig};
use crate::error::{Error, Result};
use crate::features::{SeConfig, VolterraConfig};
use crate::filter::{OnlineFilter, SweepConfig, Tnsrkf, TnsrkfConfig};
use crate::linalg::min_symmetric_eigenvalue;
use crate::tensor::Rank1FeatureTT;

/// Length of each simulated tank record.
pub const SIMULATED_TANKS_LEN: usize = 1024;

#[derive(Clone, Debug)]
pub struct RunResult {
    pub rows: Vec<MetricsRow>,
    /// Test predictions from the last state reached, in data units.
    pub means: Vec<f64>,
    /// Predictive variances as fed to the NLL.
    pub variances: Vec<f64>,
    pub targets: Vec<f64>,
    /// 1-based index of the update that failed, if any.
    pub diverged_at: Option<usize>,
    pub noise_var: f64,
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let seed = cfg.data_seed();
    match cfg.dataset {
        DatasetKind::Gp => {
            let se = SeConfig::isotropic(cfg.dims, cfg.basis, cfg.lengthscale, cfg.signal_variance, cfg.half_width);
            gen_synthetic_gp(&se, cfg.n_train, cfg.n_test, cfg.input_range, cfg.data_noise_var, seed)
        }
        DatasetKind::Volterra => {
            let v = VolterraConfig {
                dims: cfg.dims,
                basis: cfg.basis,
                lambda: cfg.lambda,
            };
            gen_volterra(&v, cfg.weight_rank, cfg.n_train, cfg.n_test, cfg.snr_db, seed)
        }
        DatasetKind::Tanks | DatasetKind::TanksSim => {
            let raw = match &cfg.data_path {
                Some(p) if cfg.dataset == DatasetKind::Tanks => load_tanks_csv(p)?,
                _ => simulate_tanks(SIMULATED_TANKS_LEN, seed),
            };
            embed_tanks(
                &raw,
                &cfg.lags(),
                cfg.basis,
                cfg.lengthscale,
                cfg.signal_variance,
                cfg.half_width,
                cfg.data_noise_var,
            )
        }
    }
}

/// Filter noise variance: the configured value, else the dataset's own.
pub fn filter_noise_var(cfg: &ExperimentConfig, data: &Dataset) -> Result<f64> {
    let v = cfg.noise_var.unwrap_or(data.noise_var);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!(
            "filter noise variance {v} is not positive; set noise_var"
        )))
    }
}

pub fn build_filter(cfg: &ExperimentConfig, data: &Dataset, noise_var: f64) -> Result<Box<dyn OnlineFilter>> {
    let prior = data.features.prior()?;
    Ok(match cfg.filter {
        FilterKind::Tnsrkf => Box::new(Tnsrkf::new(
            &prior,
            &TnsrkfConfig {
                mean_ranks: cfg.mean_rank_vector()?,
                sqrt_ranks: cfg.sqrt_rank_vector()?,
                qr_budget: cfg.qr_budget,
                noise_var,
                aug_site: cfg.aug_site,
                sweep: SweepConfig {
                    max_sweeps: cfg.max_sweeps,
                    residual_tol: cfg.residual_tol,
                    order: cfg.sweep_order.into(),
                },
                seed: cfg.seed,
            },
        )?),
        FilterKind::Tnkf => Box::new(Tnkf::new(
            &prior,
            TnkfConfig {
                mean_ranks: cfg.mean_rank_vector()?,
                cov_ranks: cfg.cov_rank_vector()?,
                rel_tol: cfg.rel_tol,
                noise_var,
            },
        )?),
        FilterKind::DenseKf => Box::new(DenseKf::new(&prior, noise_var)?),
        FilterKind::DenseSrkf => Box::new(DenseSrkf::new(&prior, noise_var)?),
    })
}

struct Evaluation {
    means: Vec<f64>,
    variances: Vec<f64>,
    rmse: f64,
    nll: f64,
}

fn evaluate(
    filter: &dyn OnlineFilter,
    test_phi: &[Rank1FeatureTT],
    targets: &[f64],
    add_noise: f64,
) -> Result<Evaluation> {
    let mut means = Vec::with_capacity(test_phi.len());
    let mut variances = Vec::with_capacity(test_phi.len());
    for phi in test_phi {
        let p = filter.predict(phi)?;
        means.push(p.mean);
        variances.push(p.variance + add_noise);
    }
    let (rmse, nll) = compute_metrics(&means, &variances, targets)?;
    Ok(Evaluation {
        means,
        variances,
        rmse,
        nll,
    })
}

/// Runs the configured experiment without touching the filesystem (apart
/// from reading a tank CSV).
///
/// Metrics are taken every `eval_every` updates and after the last one. A
/// numerical failure or a non-finite metric ends the run; the last row then
/// carries `diverged_at` and is evaluated on the last state the filter kept.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    let data = build_dataset(cfg)?;
    let noise_var = filter_noise_var(cfg, &data)?;
    let mut filter = build_filter(cfg, &data, noise_var)?;
    let add_noise = if cfg.nll_include_noise { noise_var } else { 0.0 };
    let test_phi: Vec<Rank1FeatureTT> = data
        .test_x
        .iter()
        .map(|x| data.features.features(x))
        .collect::<Result<_>>()?;
    let n = cfg.max_steps.map_or(data.train_x.len(), |m| m.min(data.train_x.len()));

    let mut rows = Vec::new();
    let mut elapsed_ms = 0.0;
    let mut diverged_at = None;
    let mut last_eval = None;
    let record = |filter: &dyn OnlineFilter, t: usize, elapsed_ms: f64, div: Option<usize>| -> Result<(MetricsRow, Evaluation)> {
        let ev = evaluate(filter, &test_phi, &data.test_y, add_noise)?;
        let min_eig = if cfg.record_min_eig {
            Some(min_symmetric_eigenvalue(&filter.dense_covariance()?))
        } else {
            None
        };
        let row = MetricsRow {
            t,
            rmse: ev.rmse,
            nll: ev.nll,
            wall_ms: if cfg.record_timing { elapsed_ms } else { 0.0 },
            min_eig,
            diverged_at: div,
        };
        Ok((row, ev))
    };

    for t in 1..=n {
        let phi = data.features.features(&data.train_x[t - 1])?;
        let start = Instant::now();
        let outcome = filter.update(&phi, data.train_y[t - 1]);
        elapsed_ms += start.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok(()) => {}
            Err(Error::NumericalFailure(msg)) => {
                log::warn!("{} failed at update {t}: {msg}", filter.name());
                diverged_at = Some(t);
                let (row, ev) = record(filter.as_ref(), t - 1, elapsed_ms, diverged_at)?;
                rows.push(row);
                last_eval = Some(ev);
                break;
            }
            Err(e) => return Err(e),
        }
        if t % cfg.eval_every == 0 || t == n {
            let (mut row, ev) = record(filter.as_ref(), t, elapsed_ms, None)?;
            let finite = row.rmse.is_finite() && row.nll.is_finite();
            if !finite {
                log::warn!("{} produced non-finite metrics at update {t}", filter.name());
                diverged_at = Some(t);
                row.diverged_at = diverged_at;
            }
            rows.push(row);
            last_eval = Some(ev);
            if !finite {
                break;
            }
        }
    }
    let ev = match last_eval {
        Some(ev) => ev,
        None => record(filter.as_ref(), 0, elapsed_ms, None)?.1,
    };
    let shift = |v: &[f64]| v.iter().map(|x| x + data.target_offset).collect();
    Ok(RunResult {
        rows,
        means: shift(&ev.means),
        variances: ev.variances,
        targets: shift(&data.test_y),
        diverged_at,
        noise_var,
    })
}

pub fn experiment_name(cfg: &ExperimentConfig, config_path: Option<&Path>) -> String {
    cfg.name
        .clone()
        .or_else(|| config_path.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| cfg.filter.as_str().to_string())
}

/// Output directory: explicit override, else `out_dir`, else `out/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, name: &str, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(name))
}

/// Writes `metrics.csv`, `predictions.csv` and, when enabled, `metrics.svg`.
pub fn write_outputs(dir: &Path, name: &str, cfg: &ExperimentConfig, result: &RunResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_metrics_csv(&dir.join("metrics.csv"), &result.rows)?;
    write_predictions_csv(&dir.join("predictions.csv"), &result.means, &result.variances, &result.targets)?;
    if cfg.plot {
        let series = vec![(name.to_string(), result.rows.iter().map(|r| (r.t, r.rmse, r.nll)).collect())];
        write_plot_svg(&dir.join("metrics.svg"), &series)?;
    }
    Ok(())
}
