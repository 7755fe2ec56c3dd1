//! Per-dimension feature factors and matching prior square-root factors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{Rank1FeatureTT, TensorTrainMatrix};

/// Hilbert-space squared-exponential basis on `[-L_d, L_d]` per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SeConfig {
    /// Basis functions per dimension.
    pub basis: usize,
    /// Lengthscale per dimension.
    pub lengthscales: Vec<f64>,
    /// Signal variance of the full product kernel.
    pub signal_variance: f64,
    /// Domain half-width per dimension.
    pub half_widths: Vec<f64>,
}

impl SeConfig {
    /// Same lengthscale and half-width in every one of `dims` dimensions.
    pub fn isotropic(dims: usize, basis: usize, lengthscale: f64, signal_variance: f64, half_width: f64) -> Self {
        Self {
            basis,
            lengthscales: vec![lengthscale; dims],
            signal_variance,
            half_widths: vec![half_width; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.basis == 0 || self.lengthscales.is_empty() {
            return Err(Error::invalid("SE basis needs at least one function and one dimension"));
        }
        if self.half_widths.len() != self.lengthscales.len() {
            return Err(Error::invalid("one half-width per dimension required"));
        }
        if self.lengthscales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("lengthscales must be positive"));
        }
        if self.half_widths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("domain half-widths must be positive"));
        }
        if !(self.signal_variance >= 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::invalid("signal variance must be nonnegative"));
        }
        Ok(())
    }

    /// `sqrt(lambda_j) = pi j / (2 L)` for `j = 1..I`.
    pub fn frequencies(&self, d: usize) -> Vec<f64> {
        (1..=self.basis)
            .map(|j| PI * j as f64 / (2.0 * self.half_widths[d]))
            .collect()
    }

    /// Per-dimension spectral density with the signal variance split evenly
    /// in log space across dimensions.
    pub fn spectral_density(&self, d: usize, omega: f64) -> f64 {
        let l = self.lengthscales[d];
        let share = self.signal_variance.powf(1.0 / self.dims() as f64);
        share * (2.0 * PI * l * l).sqrt() * (-0.5 * omega * omega * l * l).exp()
    }
}

/// Truncated Volterra monomial basis: memory `basis - 1`, order `dims`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolterraConfig {
    pub dims: usize,
    pub basis: usize,
    /// Prior weight variance.
    pub lambda: f64,
}

impl VolterraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.basis < 2 {
            return Err(Error::invalid("Volterra basis needs dims >= 1 and basis >= 2"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        Ok(())
    }
}

/// Zero-mean Gaussian prior whose covariance square root is a Kronecker
/// product of per-dimension factors.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    pub sqrt_factors: Vec<DMatrix<f64>>,
}

impl PriorSpec {
    pub fn mode_sizes(&self) -> Vec<usize> {
        self.sqrt_factors.iter().map(DMatrix::nrows).collect()
    }

    pub fn col_sizes(&self) -> Vec<usize> {
        self.sqrt_factors.iter().map(DMatrix::ncols).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sqrt_factors.is_empty() {
            return Err(Error::invalid("prior has no factors"));
        }
        for f in &self.sqrt_factors {
            if f.is_empty() || f.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("prior factors must be nonempty and finite"));
            }
        }
        Ok(())
    }

    /// The rank-1 train-matrix square root.
    pub fn sqrt_ttm(&self) -> Result<TensorTrainMatrix> {
        self.validate()?;
        TensorTrainMatrix::from_kron_factors(&self.sqrt_factors)
    }

    /// Dense Kronecker covariance `kron_d L_d L_d^T` (small sizes only).
    pub fn dense_covariance(&self) -> DMatrix<f64> {
        let mut p = DMatrix::from_element(1, 1, 1.0);
        for f in &self.sqrt_factors {
            p = p.kronecker(&(f * f.transpose()));
        }
        p
    }
}

/// `phi_j(x) = L^{-1/2} sin(pi j (x + L) / (2 L))`, `j = 1..I`, per dimension.
pub fn hilbert_se_factors(x: &[f64], cfg: &SeConfig) -> Result<Rank1FeatureTT> {
    cfg.validate()?;
    if x.len() != cfg.dims() {
        return Err(Error::invalid(format!(
            "input has {} coordinates, basis expects {}",
            x.len(),
            cfg.dims()
        )));
    }
    let factors = x
        .iter()
        .enumerate()
        .map(|(d, &xd)| {
            let l = cfg.half_widths[d];
            if !(xd >= -l && xd <= l) {
                return Err(Error::Domain(format!("x[{d}] = {xd} outside [-{l}, {l}]")));
            }
            let scale = l.sqrt().recip();
            Ok(DVector::from_iterator(
                cfg.basis,
                (1..=cfg.basis).map(|j| scale * (PI * j as f64 * (xd + l) / (2.0 * l)).sin()),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Rank1FeatureTT::new(factors)
}

/// Diagonal factors `sqrt(S_d(sqrt(lambda_j)))`.
pub fn se_prior(cfg: &SeConfig) -> Result<PriorSpec> {
    cfg.validate()?;
    let sqrt_factors = (0..cfg.dims())
        .map(|d| {
            let diag = DVector::from_iterator(
                cfg.basis,
                cfg.frequencies(d)
                    .into_iter()
                    .map(|w| cfg.spectral_density(d, w).sqrt()),
            );
            DMatrix::from_diagonal(&diag)
        })
        .collect();
    Ok(PriorSpec { sqrt_factors })
}

/// Every factor is `[1, u_t, u_{t-1}, .., u_{t-I+2}]`; `window[0]` is the
/// current input.
pub fn volterra_factors(window: &[f64], cfg: &VolterraConfig) -> Result<Rank1FeatureTT> {
    cfg.validate()?;
    if window.len() < cfg.basis - 1 {
        return Err(Error::invalid(format!(
            "window of {} inputs, need {}",
            window.len(),
            cfg.basis - 1
        )));
    }
    let mut f = DVector::zeros(cfg.basis);
    f[0] = 1.0;
    for (k, &u) in window.iter().take(cfg.basis - 1).enumerate() {
        f[k + 1] = u;
    }
    Rank1FeatureTT::new(vec![f; cfg.dims])
}

/// `sqrt(lambda) I` on factor 0, identities elsewhere.
pub fn volterra_prior(cfg: &VolterraConfig) -> Result<PriorSpec> {
    cfg.validate()?;
    let mut sqrt_factors = vec![DMatrix::identity(cfg.basis, cfg.basis); cfg.dims];
    sqrt_factors[0] *= cfg.lambda.sqrt();
    Ok(PriorSpec { sqrt_factors })
}

/// Which past inputs and outputs form the regression input.
#[derive(Clone, Debug, PartialEq)]
pub struct LagConfig {
    /// Input lags, 0 = current input.
    pub input_lags: Vec<usize>,
    /// Output lags, must be >= 1.
    pub output_lags: Vec<usize>,
}

impl Default for LagConfig {
    fn default() -> Self {
        Self {
            input_lags: (0..7).collect(),
            output_lags: (1..8).collect(),
        }
    }
}

impl LagConfig {
    pub fn dims(&self) -> usize {
        self.input_lags.len() + self.output_lags.len()
    }

    pub fn max_lag(&self) -> usize {
        self.input_lags
            .iter()
            .chain(&self.output_lags)
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims() == 0 {
            return Err(Error::invalid("no lags selected"));
        }
        if self.output_lags.contains(&0) {
            return Err(Error::invalid("output lag 0 would leak the target"));
        }
        Ok(())
    }
}

/// Raw lagged regressor at time `t`: selected inputs, then selected outputs.
/// Returns [`Error::NotReady`] while the history is too short.
pub fn lagged_io_embedding(u: &[f64], y: &[f64], t: usize, lags: &LagConfig) -> Result<Vec<f64>> {
    lags.validate()?;
    if t < lags.max_lag() || t >= u.len() || t > y.len() {
        return Err(Error::NotReady);
    }
    let mut out = Vec::with_capacity(lags.dims());
    out.extend(lags.input_lags.iter().map(|&l| u[t - l]));
    out.extend(lags.output_lags.iter().map(|&l| y[t - l]));
    Ok(out)
}

/// Per-coordinate affine map sending a calibration range onto
/// `[-0.9 L_d, 0.9 L_d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagScaler {
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
    pub half_widths: Vec<f64>,
}

impl LagScaler {
    pub const MARGIN: f64 = 0.9;

    /// Fits on calibration rows; constant coordinates map to 0.
    pub fn fit(rows: &[Vec<f64>], half_widths: &[f64]) -> Result<Self> {
        let d = half_widths.len();
        if rows.is_empty() || rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("calibration rows missing or of the wrong width"));
        }
        let mut offsets = Vec::with_capacity(d);
        let mut scales = Vec::with_capacity(d);
        for k in 0..d {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[k]), hi.max(r[k]))
                });
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            offsets.push(mid);
            scales.push(if half > 0.0 {
                Self::MARGIN * half_widths[k] / half
            } else {
                0.0
            });
        }
        Ok(Self {
            offsets,
            scales,
            half_widths: half_widths.to_vec(),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| (v - self.offsets[k]) * self.scales[k])
            .collect()
    }

    /// As [`apply`](Self::apply), then clamped into the closed domain.
    pub fn apply_clamped(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.clamp(-self.half_widths[k], self.half_widths[k]))
            .collect()
    }
}
