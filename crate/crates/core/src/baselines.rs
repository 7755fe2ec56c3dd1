//! Reference filters: dense Kalman (Joseph form), dense square-root Kalman
//! and the rounding-based train filter that updates `P` directly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::PriorSpec;
use crate::filter::{GaussianPrediction, OnlineFilter};
use crate::linalg::qr_positive;
use crate::tensor::{Canonical, Rank1FeatureTT, TensorTrain, TensorTrainMatrix};

/// Largest state dimension the dense baselines accept by default.
pub const DENSE_BASELINE_CAP: usize = 4096;

fn dense_prior(prior: &PriorSpec, cap: usize) -> Result<(usize, DMatrix<f64>)> {
    prior.validate()?;
    let m: usize = prior.mode_sizes().iter().product();
    if m > cap {
        return Err(Error::ResourceLimit { requested: m, cap });
    }
    let mut l = DMatrix::from_element(1, 1, 1.0);
    for f in &prior.sqrt_factors {
        l = l.kronecker(f);
    }
    Ok((m, l))
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var > 0.0 && noise_var.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("noise variance must be positive"))
    }
}

fn dense_feature(phi: &Rank1FeatureTT, m: usize) -> Result<DVector<f64>> {
    let v = phi.to_dense()?;
    if v.len() != m {
        return Err(Error::invalid(format!("feature length {} for state size {m}", v.len())));
    }
    Ok(v)
}

/// Dense Kalman measurement update with the Joseph-form covariance.
#[derive(Clone, Debug)]
pub struct DenseKf {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    noise_var: f64,
}

impl DenseKf {
    pub fn new(prior: &PriorSpec, noise_var: f64) -> Result<Self> {
        Self::with_cap(prior, noise_var, DENSE_BASELINE_CAP)
    }

    pub fn with_cap(prior: &PriorSpec, noise_var: f64, cap: usize) -> Result<Self> {
        check_noise(noise_var)?;
        let (m, l) = dense_prior(prior, cap)?;
        Ok(Self {
            mean: DVector::zeros(m),
            cov: &l * l.transpose(),
            noise_var,
        })
    }

    /// Starts from an explicit mean and covariance.
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        check_noise(noise_var)?;
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(Error::invalid("covariance shape does not match the mean"));
        }
        Ok(Self { mean, cov, noise_var })
    }

    pub fn update_dense(&mut self, phi: &DVector<f64>, y: f64) -> Result<()> {
        let pphi = &self.cov * phi;
        let s = phi.dot(&pphi) + self.noise_var;
        let k = pphi / s;
        let resid = y - phi.dot(&self.mean);
        let a = DMatrix::identity(self.mean.len(), self.mean.len()) - &k * phi.transpose();
        let cov = &a * &self.cov * a.transpose() + (&k * k.transpose()) * self.noise_var;
        let mean = &self.mean + &k * resid;
        if !s.is_finite() || mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite dense Kalman update"));
        }
        self.mean = mean;
        self.cov = cov;
        Ok(())
    }
}

impl OnlineFilter for DenseKf {
    fn name(&self) -> &'static str {
        "dense_kf"
    }

    fn update(&mut self, phi: &Rank1FeatureTT, y: f64) -> Result<()> {
        let v = dense_feature(phi, self.mean.len())?;
        self.update_dense(&v, y)
    }

    fn predict(&self, phi: &Rank1FeatureTT) -> Result<GaussianPrediction> {
        let v = dense_feature(phi, self.mean.len())?;
        Ok(GaussianPrediction {
            mean: v.dot(&self.mean),
            variance: v.dot(&(&self.cov * &v)).max(0.0),
        })
    }

    fn noise_var(&self) -> f64 {
        self.noise_var
    }

    fn dense_mean(&self) -> Result<DVector<f64>> {
        Ok(self.mean.clone())
    }

    fn dense_covariance(&self) -> Result<DMatrix<f64>> {
        Ok(self.cov.clone())
    }
}

/// Dense square-root update: `L <- R^T` from the thin QR of
/// `[(I - K phi^T) L, sigma K]^T`.
#[derive(Clone, Debug)]
pub struct DenseSrkf {
    pub mean: DVector<f64>,
    /// Lower triangular with nonnegative diagonal after the first update.
    pub sqrt_cov: DMatrix<f64>,
    noise_var: f64,
}

impl DenseSrkf {
    pub fn new(prior: &PriorSpec, noise_var: f64) -> Result<Self> {
        Self::with_cap(prior, noise_var, DENSE_BASELINE_CAP)
    }

    pub fn with_cap(prior: &PriorSpec, noise_var: f64, cap: usize) -> Result<Self> {
        check_noise(noise_var)?;
        let (m, l) = dense_prior(prior, cap)?;
        Ok(Self {
            mean: DVector::zeros(m),
            sqrt_cov: l,
            noise_var,
        })
    }

    pub fn update_dense(&mut self, phi: &DVector<f64>, y: f64) -> Result<()> {
        let m = self.mean.len();
        let v = self.sqrt_cov.transpose() * phi;
        let s = v.norm_squared() + self.noise_var;
        let k = &self.sqrt_cov * &v / s;
        let resid = y - phi.dot(&self.mean);
        let a = DMatrix::identity(m, m) - &k * phi.transpose();
        let mut stacked = DMatrix::zeros(m, self.sqrt_cov.ncols() + 1);
        stacked
            .columns_mut(0, self.sqrt_cov.ncols())
            .copy_from(&(&a * &self.sqrt_cov));
        stacked
            .column_mut(self.sqrt_cov.ncols())
            .copy_from(&(&k * self.noise_var.sqrt()));
        let (_, r) = qr_positive(stacked.transpose());
        let l = r.transpose();
        let mean = &self.mean + &k * resid;
        if !s.is_finite() || mean.iter().chain(l.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite square-root update"));
        }
        self.mean = mean;
        self.sqrt_cov = l;
        Ok(())
    }
}

impl OnlineFilter for DenseSrkf {
    fn name(&self) -> &'static str {
        "dense_srkf"
    }

    fn update(&mut self, phi: &Rank1FeatureTT, y: f64) -> Result<()> {
        let v = dense_feature(phi, self.mean.len())?;
        self.update_dense(&v, y)
    }

    fn predict(&self, phi: &Rank1FeatureTT) -> Result<GaussianPrediction> {
        let v = dense_feature(phi, self.mean.len())?;
        Ok(GaussianPrediction {
            mean: v.dot(&self.mean),
            variance: (self.sqrt_cov.transpose() * &v).norm_squared(),
        })
    }

    fn noise_var(&self) -> f64 {
        self.noise_var
    }

    fn dense_mean(&self) -> Result<DVector<f64>> {
        Ok(self.mean.clone())
    }

    fn dense_covariance(&self) -> Result<DMatrix<f64>> {
        Ok(&self.sqrt_cov * self.sqrt_cov.transpose())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TnkfConfig {
    /// Mean ranks `R_0 .. R_D` after rounding.
    pub mean_ranks: Vec<usize>,
    /// Covariance ranks `R_0 .. R_D` after rounding.
    pub cov_ranks: Vec<usize>,
    pub rel_tol: f64,
    pub noise_var: f64,
}

/// Train filter that propagates `P` itself and rounds it after every update.
/// Nothing keeps the rounded `P` positive semi-definite.
#[derive(Clone, Debug)]
pub struct Tnkf {
    mean: TensorTrain,
    cov: TensorTrainMatrix,
    cfg: TnkfConfig,
    last_pre_round_ranks: Option<Vec<usize>>,
}

impl Tnkf {
    pub fn new(prior: &PriorSpec, cfg: TnkfConfig) -> Result<Self> {
        prior.validate()?;
        check_noise(cfg.noise_var)?;
        let d = prior.sqrt_factors.len();
        if cfg.mean_ranks.len() != d + 1 || cfg.cov_ranks.len() != d + 1 {
            return Err(Error::invalid(format!("rank vectors must have length {}", d + 1)));
        }
        let factors: Vec<DMatrix<f64>> = prior
            .sqrt_factors
            .iter()
            .map(|f| f * f.transpose())
            .collect();
        Ok(Self {
            mean: TensorTrain::zeros(&prior.mode_sizes())?,
            cov: TensorTrainMatrix::from_kron_factors(&factors)?,
            cfg,
            last_pre_round_ranks: None,
        })
    }

    pub fn mean(&self) -> &TensorTrain {
        &self.mean
    }

    pub fn cov(&self) -> &TensorTrainMatrix {
        &self.cov
    }

    /// Covariance ranks right before the most recent rounding.
    pub fn last_pre_round_ranks(&self) -> Option<&[usize]> {
        self.last_pre_round_ranks.as_deref()
    }

    pub fn step(&mut self, phi: &Rank1FeatureTT, y: f64) -> Result<()> {
        let phi_tt = phi.to_tt();
        let pphi = self.cov.apply(&phi_tt)?;
        let s = phi_tt.dot(&pphi)? + self.cfg.noise_var;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::numerical(format!("innovation {s} is not positive")));
        }
        let mut gain = pphi;
        gain.scale(1.0 / s);
        let resid = y - phi.dot_tt(&self.mean)?;

        let mut step = gain.clone();
        step.scale(resid);
        let mut mean = self.mean.add(&step)?;
        mean.round(&self.cfg.mean_ranks, self.cfg.rel_tol)?;

        let mut downdate = TensorTrainMatrix::outer(&gain, &gain, self.cov.aug_site())?;
        downdate.scale(-s);
        let mut cov = self.cov.add(&downdate)?;
        let pre = cov.ranks();
        cov.round(&self.cfg.cov_ranks, self.cfg.rel_tol)?;

        if !mean.is_finite() || !cov.is_finite() {
            return Err(Error::numerical("non-finite state after update"));
        }
        self.mean = mean;
        self.cov = cov;
        self.last_pre_round_ranks = Some(pre);
        Ok(())
    }
}

impl OnlineFilter for Tnkf {
    fn name(&self) -> &'static str {
        "tnkf"
    }

    fn update(&mut self, phi: &Rank1FeatureTT, y: f64) -> Result<()> {
        self.step(phi, y)
    }

    /// The variance is reported as computed; it may be negative once `P`
    /// has lost definiteness.
    fn predict(&self, phi: &Rank1FeatureTT) -> Result<GaussianPrediction> {
        let phi_tt = phi.to_tt();
        let pphi = self.cov.apply(&phi_tt)?;
        Ok(GaussianPrediction {
            mean: phi.dot_tt(&self.mean)?,
            variance: phi_tt.dot(&pphi)?,
        })
    }

    fn noise_var(&self) -> f64 {
        self.cfg.noise_var
    }

    fn dense_mean(&self) -> Result<DVector<f64>> {
        self.mean.to_dense()
    }

    fn dense_covariance(&self) -> Result<DMatrix<f64>> {
        self.cov.to_dense()
    }
}
