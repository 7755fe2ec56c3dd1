//! Test-set metrics after each evaluated update.
//!
//! `RMSE = sqrt(sum (m - y)^2 / N)` and
//! `NLL = 0.5 sum [log(2 pi s2) + (m - y)^2 / s2]` with `s2` the predictive
//! variance handed in (latent variance plus noise when the runner asks for it).

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    /// Number of measurement updates absorbed.
    pub t: usize,
    pub rmse: f64,
    pub nll: f64,
    pub wall_ms: f64,
    pub min_eig: Option<f64>,
    /// Update index that failed, set on the last row of a diverged run.
    pub diverged_at: Option<usize>,
}

/// RMSE and NLL of predictions against targets.
///
/// A variance `<= 0` (or NaN) makes that term undefined, so the NLL is
/// reported as `+inf` instead of failing. Finite metrics never come from
/// such a row.
pub fn compute_metrics(means: &[f64], variances: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    let n = targets.len();
    if means.len() != n || variances.len() != n {
        return Err(Error::invalid(format!(
            "{} means, {} variances, {n} targets",
            means.len(),
            variances.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("empty test set"));
    }
    let mut sq = 0.0;
    let mut nll = 0.0;
    for ((&m, &s2), &y) in means.iter().zip(variances).zip(targets) {
        let r2 = (m - y) * (m - y);
        sq += r2;
        nll += if s2 > 0.0 {
            0.5 * ((2.0 * PI * s2).ln() + r2 / s2)
        } else {
            f64::INFINITY
        };
    }
    Ok(((sq / n as f64).sqrt(), nll))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_gives_infinite_nll() {
        let (rmse, nll) = compute_metrics(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((rmse - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(nll, f64::INFINITY);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(compute_metrics(&[0.0], &[1.0, 1.0], &[0.0]).is_err());
    }
}
