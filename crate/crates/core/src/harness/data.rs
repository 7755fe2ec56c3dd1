//! Datasets: synthetic reduced-rank GP draws, Volterra systems, and the
//! cascaded-tanks benchmark (from CSV or simulated).
//!
//! All randomness comes from one `ChaCha8Rng` per dataset, so a seed fixes
//! every value bit for bit.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::output::fmt_g17;
use crate::error::{Error, Result};
use crate::features::{
    hilbert_se_factors, lagged_io_embedding, se_prior, volterra_factors, volterra_prior, LagConfig,
    LagScaler, PriorSpec, SeConfig, VolterraConfig,
};
use crate::tensor::{dense_cap, feasible_ranks, uniform_ranks, Core3, Rank1FeatureTT, TensorTrain};

/// Turns a raw input row into a rank-1 feature train.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMap {
    Se(SeConfig),
    /// Rows are input windows, newest first.
    Volterra(VolterraConfig),
}

impl FeatureMap {
    pub fn features(&self, x: &[f64]) -> Result<Rank1FeatureTT> {
        match self {
            FeatureMap::Se(cfg) => hilbert_se_factors(x, cfg),
            FeatureMap::Volterra(cfg) => volterra_factors(x, cfg),
        }
    }

    pub fn prior(&self) -> Result<PriorSpec> {
        match self {
            FeatureMap::Se(cfg) => se_prior(cfg),
            FeatureMap::Volterra(cfg) => volterra_prior(cfg),
        }
    }
}

/// Weights that generated a synthetic dataset.
#[derive(Clone, Debug)]
pub enum TrueWeights {
    Dense(DVector<f64>),
    Train(TensorTrain),
}

impl TrueWeights {
    /// Noiseless model output at one feature.
    pub fn evaluate(&self, phi: &Rank1FeatureTT) -> Result<f64> {
        match self {
            TrueWeights::Dense(w) => Ok(phi.to_dense()?.dot(w)),
            TrueWeights::Train(w) => phi.dot_tt(w),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub features: FeatureMap,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
    pub test_x: Vec<Vec<f64>>,
    pub test_y: Vec<f64>,
    /// Measurement-noise variance used to generate (or assumed for) `y`.
    pub noise_var: f64,
    pub true_weights: Option<TrueWeights>,
    /// Series index of the first emitted sample, 0-based.
    pub first_index: usize,
    /// Subtracted from every target before filtering; add back to report.
    pub target_offset: f64,
}

impl Dataset {
    pub fn dims(&self) -> usize {
        self.train_x.first().map_or(0, Vec::len)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws `w = L_0 z` from the SE prior, inputs uniform on
/// `[-input_range, input_range]^D`, and `y = phi(x)^T w + e`.
pub fn gen_synthetic_gp(
    se: &SeConfig,
    n_train: usize,
    n_test: usize,
    input_range: f64,
    noise_var: f64,
    seed: u64,
) -> Result<Dataset> {
    se.validate()?;
    if input_range.is_nan() || input_range <= 0.0 || se.half_widths.iter().any(|&l| input_range > l) {
        return Err(Error::invalid("input range must be positive and inside the basis domain"));
    }
    if noise_var.is_nan() || noise_var < 0.0 {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let prior = se_prior(se)?;
    let m = prior
        .mode_sizes()
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .unwrap_or(usize::MAX);
    let cap = dense_cap();
    if m > cap {
        return Err(Error::ResourceLimit { requested: m, cap });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l = DMatrix::from_element(1, 1, 1.0);
    for f in &prior.sqrt_factors {
        l = l.kronecker(f);
    }
    let z = DVector::from_fn(l.ncols(), |_, _| normal(&mut rng));
    let w = &l * z;
    let weights = TrueWeights::Dense(w);
    let features = FeatureMap::Se(se.clone());
    let d = se.dims();
    let sigma = noise_var.sqrt();
    let draw = |count: usize, rng: &mut ChaCha8Rng| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut xs = Vec::with_capacity(count);
        let mut ys = Vec::with_capacity(count);
        for _ in 0..count {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-input_range..=input_range)).collect();
            let f = weights.evaluate(&features.features(&x)?)?;
            ys.push(f + sigma * normal(rng));
            xs.push(x);
        }
        Ok((xs, ys))
    };
    let (train_x, train_y) = draw(n_train, &mut rng)?;
    let (test_x, test_y) = draw(n_test, &mut rng)?;
    Ok(Dataset {
        features,
        train_x,
        train_y,
        test_x,
        test_y,
        noise_var,
        true_weights: Some(weights),
        first_index: 0,
        target_offset: 0.0,
    })
}

/// Random train weights of interior rank `weight_rank` (entry standard
/// deviation `1/sqrt(R_right)` keeps outputs of order one), driven by i.i.d.
/// `U(-1, 1)` input. The noise variance is the sample output power divided
/// by `10^(snr_db/10)`; `snr_db = +inf` gives noiseless outputs.
pub fn gen_volterra(
    cfg: &VolterraConfig,
    weight_rank: usize,
    n_train: usize,
    n_test: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid("SNR must be a number or +inf"));
    }
    if weight_rank == 0 {
        return Err(Error::invalid("weight rank must be positive"));
    }
    let modes = vec![cfg.basis; cfg.dims];
    let ranks = feasible_ranks(&modes, &uniform_ranks(cfg.dims, weight_rank))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores: Vec<Core3> = (0..cfg.dims)
        .map(|k| {
            let std_dev = 1.0 / (ranks[k + 1] as f64).sqrt();
            let mut core = Core3::zeros(ranks[k], cfg.basis, ranks[k + 1]);
            for v in core.data_mut() {
                *v = std_dev * normal(&mut rng);
            }
            core
        })
        .collect();
    let weights = TrueWeights::Train(TensorTrain::new(cores)?);

    let memory = cfg.basis - 1;
    let total = n_train + n_test;
    let u: Vec<f64> = (0..total + memory - 1)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let features = FeatureMap::Volterra(cfg.clone());
    let mut windows = Vec::with_capacity(total);
    let mut clean = Vec::with_capacity(total);
    for t in 0..total {
        let now = t + memory - 1;
        let window: Vec<f64> = (0..memory).map(|k| u[now - k]).collect();
        clean.push(weights.evaluate(&features.features(&window)?)?);
        windows.push(window);
    }
    let power = clean.iter().map(|f| f * f).sum::<f64>() / total.max(1) as f64;
    let noise_var = if snr_db == f64::INFINITY {
        0.0
    } else {
        power / 10f64.powf(snr_db / 10.0)
    };
    let sigma = noise_var.sqrt();
    let y: Vec<f64> = clean.iter().map(|f| f + sigma * normal(&mut rng)).collect();
    let test_x = windows.split_off(n_train);
    let mut train_y = y;
    let test_y = train_y.split_off(n_train);
    Ok(Dataset {
        features,
        train_x: windows,
        train_y,
        test_x,
        test_y,
        noise_var,
        true_weights: Some(weights),
        first_index: memory - 1,
        target_offset: 0.0,
    })
}

/// Writes `split,x0..x{D-1},y` with `split` in `{train, test}`.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec!["split".to_string()];
    header.extend((0..data.dims()).map(|k| format!("x{k}")));
    header.push("y".into());
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    let splits = [("train", &data.train_x, &data.train_y), ("test", &data.test_x, &data.test_y)];
    for (split, xs, ys) in splits {
        for (x, &y) in xs.iter().zip(ys.iter()) {
            let mut rec = vec![split.to_string()];
            rec.extend(x.iter().map(|&v| fmt_g17(v)));
            rec.push(fmt_g17(y));
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Raw cascaded-tanks series: estimation and validation records.
#[derive(Clone, Debug, PartialEq)]
pub struct TanksData {
    pub u_est: Vec<f64>,
    pub y_est: Vec<f64>,
    pub u_val: Vec<f64>,
    pub y_val: Vec<f64>,
}

pub const TANKS_COLUMNS: [&str; 4] = ["uEst", "yEst", "uVal", "yVal"];

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a CSV with a header naming `uEst, yEst, uVal, yVal` (any order,
/// extra columns ignored). Rows are 1-based in diagnostics, header = row 1.
pub fn load_tanks_csv(path: &Path) -> Result<TanksData> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, format!("header: {e}")))?
        .clone();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(TANKS_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, format!("missing column `{name}`")))?;
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (r, record) in reader.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(|e| parse_err(path, format!("row {row}: {e}")))?;
        for (c, &i) in idx.iter().enumerate() {
            let field = record
                .get(i)
                .ok_or_else(|| parse_err(path, format!("row {row}: column `{}` missing", TANKS_COLUMNS[c])))?;
            let v: f64 = field.parse().map_err(|_| {
                parse_err(path, format!("row {row}, column `{}`: `{field}` is not a number", TANKS_COLUMNS[c]))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, format!("row {row}, column `{}`: non-finite value", TANKS_COLUMNS[c])));
            }
            cols[c].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    let [u_est, y_est, u_val, y_val] = cols;
    Ok(TanksData { u_est, y_est, u_val, y_val })
}

/// Writes the four columns with 17 significant digits so a reload is
/// bit-exact.
pub fn write_tanks_csv(path: &Path, data: &TanksData) -> Result<()> {
    let n = data.u_est.len();
    if [data.y_est.len(), data.u_val.len(), data.y_val.len()].iter().any(|&l| l != n) {
        return Err(Error::invalid("tank series have different lengths"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(TANKS_COLUMNS).map_err(|e| csv_io(path, e))?;
    for t in 0..n {
        let row = [data.u_est[t], data.y_est[t], data.u_val[t], data.y_val[t]].map(fmt_g17);
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => parse_err(path, format!("{other:?}")),
    }
}

/// Two stacked tanks with square-root outflow and overflow at level 10.
/// Sample time 4 s, input held for a random 5 to 30 samples at a level in
/// `[2, 8]`; the lower level is measured with `N(0, 0.01)` noise.
pub fn simulate_tanks(n: usize, seed: u64) -> TanksData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = |rng: &mut ChaCha8Rng| {
        let (k1, k2, k3, dt, cap) = (0.054, 0.047, 0.085, 4.0, 10.0);
        let (mut x1, mut x2) = (3.0_f64, 3.0_f64);
        let mut u = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let (mut level, mut hold) = (5.0, 0usize);
        for _ in 0..n {
            if hold == 0 {
                level = rng.random_range(2.0..=8.0);
                hold = rng.random_range(5..=30);
            }
            hold -= 1;
            let flow12 = k1 * x1.sqrt();
            let mut nx1 = x1 + dt * (k3 * level - flow12);
            let spill = (nx1 - cap).max(0.0);
            nx1 = nx1.clamp(0.0, cap);
            let nx2 = (x2 + dt * (flow12 - k2 * x2.sqrt()) + 0.5 * spill).clamp(0.0, cap);
            u.push(level);
            y.push(x2 + 0.1 * normal(rng));
            x1 = nx1;
            x2 = nx2;
        }
        (u, y)
    };
    let (u_est, y_est) = run(&mut rng);
    let (u_val, y_val) = run(&mut rng);
    TanksData { u_est, y_est, u_val, y_val }
}

/// Lagged regressors for every index from `max_lag` on, scaled onto
/// `[-0.9 L, 0.9 L]` with ranges fitted on the estimation record. Test rows
/// are clamped into the domain. Targets are centered on the estimation mean
/// because the prior has zero mean.
pub fn embed_tanks(
    data: &TanksData,
    lags: &LagConfig,
    basis: usize,
    lengthscale: f64,
    signal_variance: f64,
    half_width: f64,
    noise_var: f64,
) -> Result<Dataset> {
    lags.validate()?;
    let start = lags.max_lag();
    let rows = |u: &[f64], y: &[f64]| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for t in start..u.len().min(y.len()) {
            xs.push(lagged_io_embedding(u, y, t, lags)?);
            ys.push(y[t]);
        }
        Ok((xs, ys))
    };
    let (raw_train, mut train_y) = rows(&data.u_est, &data.y_est)?;
    let (raw_test, mut test_y) = rows(&data.u_val, &data.y_val)?;
    if raw_train.is_empty() {
        return Err(Error::invalid("series shorter than the largest lag"));
    }
    let offset = train_y.iter().sum::<f64>() / train_y.len() as f64;
    train_y.iter_mut().chain(test_y.iter_mut()).for_each(|y| *y -= offset);
    let d = lags.dims();
    let scaler = LagScaler::fit(&raw_train, &vec![half_width; d])?;
    let se = SeConfig::isotropic(d, basis, lengthscale, signal_variance, half_width);
    Ok(Dataset {
        features: FeatureMap::Se(se),
        train_x: raw_train.iter().map(|r| scaler.apply(r)).collect(),
        train_y,
        test_x: raw_test.iter().map(|r| scaler.apply_clamped(r)).collect(),
        test_y,
        noise_var,
        true_weights: None,
        first_index: start,
        target_offset: offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gp_shapes() {
        let se = SeConfig::isotropic(3, 4, 0.5, 1.0, 1.5);
        let ds = gen_synthetic_gp(&se, 100, 100, 1.0, 0.01, 3).unwrap();
        assert_eq!((ds.train_x.len(), ds.test_x.len(), ds.dims()), (100, 100, 3));
        match ds.true_weights.unwrap() {
            TrueWeights::Dense(w) => assert_eq!(w.len(), 64),
            TrueWeights::Train(_) => panic!("expected dense weights"),
        }
    }

    #[test]
    fn tanks_embedding_starts_at_max_lag() {
        let data = simulate_tanks(64, 1);
        let ds = embed_tanks(&data, &LagConfig::default(), 4, 1.0, 1.0, 1.5, 0.01).unwrap();
        assert_eq!(ds.first_index, 7);
        assert_eq!(ds.train_x.len(), 64 - 7);
        assert_eq!(ds.train_y[0] + ds.target_offset, data.y_est[7]);
        assert!(ds.train_x.iter().flatten().all(|v| v.abs() <= 0.9 * 1.5 + 1e-12));
    }
}
