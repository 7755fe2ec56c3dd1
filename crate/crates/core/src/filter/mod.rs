//! Online measurement-update filters sharing one driving interface.

mod tnsrkf;

pub use tnsrkf::{
    auto_qr_budget, move_aug_index, qr_step, CovarianceUpdate, QrReport, StepObservation,
    SweepConfig, Tnsrkf, TnsrkfConfig,
};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::tensor::Rank1FeatureTT;

/// Predictive mean and variance of the latent function at one input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPrediction {
    pub mean: f64,
    /// Never negative for the square-root filters.
    pub variance: f64,
}

/// A filter that absorbs one scalar measurement `y = phi^T w + noise` at a time.
pub trait OnlineFilter {
    fn name(&self) -> &'static str;

    /// Measurement update. On error the filter state is left as before the call.
    fn update(&mut self, phi: &Rank1FeatureTT, y: f64) -> Result<()>;

    fn predict(&self, phi: &Rank1FeatureTT) -> Result<GaussianPrediction>;

    fn noise_var(&self) -> f64;

    fn dense_mean(&self) -> Result<DVector<f64>>;

    /// Dense weight covariance.
    fn dense_covariance(&self) -> Result<DMatrix<f64>>;
}
