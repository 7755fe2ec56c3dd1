//! Feature maps and priors against closed forms and brute-force references.

mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::*;
use ttsrkf::features::{
    hilbert_se_factors, lagged_io_embedding, se_prior, volterra_factors, volterra_prior, LagConfig,
    LagScaler, SeConfig, VolterraConfig,
};

#[test]
fn hilbert_basis_reproduces_the_se_kernel() {
    let cfg = SeConfig::isotropic(1, 64, 0.5, 1.0, 3.0);
    let p0 = se_prior(&cfg).unwrap().dense_covariance();
    let grid: Vec<f64> = (0..=40).map(|k| -1.0 + 0.05 * k as f64).collect();
    let feats: Vec<DVector<f64>> = grid
        .iter()
        .map(|&x| dense_feature(&hilbert_se_factors(&[x], &cfg).unwrap()))
        .collect();
    let mut worst: f64 = 0.0;
    for (a, fa) in grid.iter().zip(&feats) {
        for (b, fb) in grid.iter().zip(&feats) {
            let approx = fa.dot(&(&p0 * fb));
            let exact = (-(a - b) * (a - b) / (2.0 * 0.25)).exp();
            worst = worst.max((approx - exact).abs());
        }
    }
    assert!(worst <= 1e-3, "max deviation {worst}");
}

#[test]
fn prior_diagonal_product_is_the_joint_spectral_density() {
    let cfg = SeConfig {
        basis: 5,
        lengthscales: vec![0.4, 0.7, 1.1],
        signal_variance: 2.5,
        half_widths: vec![1.5, 2.0, 2.5],
    };
    let prior = se_prior(&cfg).unwrap();
    let freqs: Vec<Vec<f64>> = (0..3).map(|d| cfg.frequencies(d)).collect();
    for j in [[0, 0, 0], [1, 3, 2], [4, 4, 4], [2, 0, 1]] {
        let product: f64 = (0..3)
            .map(|d| prior.sqrt_factors[d][(j[d], j[d])].powi(2))
            .product();
        // S(w) = sigma_f^2 prod_d sqrt(2 pi l_d^2) exp(-w_d^2 l_d^2 / 2)
        let joint = cfg.signal_variance
            * (0..3)
                .map(|d| {
                    let (l, w) = (cfg.lengthscales[d], freqs[d][j[d]]);
                    (2.0 * PI * l * l).sqrt() * (-0.5 * w * w * l * l).exp()
                })
                .product::<f64>();
        assert_relative_eq!(product, joint, max_relative = 1e-13);
    }
}

#[test]
fn features_are_the_laplacian_eigenfunctions() {
    let cfg = SeConfig::isotropic(2, 3, 1.0, 1.0, 2.0);
    let phi = hilbert_se_factors(&[0.3, -1.2], &cfg).unwrap();
    for (d, &x) in [0.3f64, -1.2].iter().enumerate() {
        for j in 1..=3 {
            let expect = (PI * j as f64 * (x + 2.0) / 4.0).sin() / 2f64.sqrt();
            assert_relative_eq!(phi.factor(d)[j - 1], expect, max_relative = 1e-14);
        }
    }
}

#[test]
fn volterra_feature_matches_brute_force_model() {
    let cfg = VolterraConfig {
        dims: 3,
        basis: 3,
        lambda: 1.0,
    };
    let mut r = rng(1);
    let window = [0.7, -0.4];
    let w = random_matrix(27, 1, &mut r).column(0).into_owned();
    let phi = dense_feature(&volterra_factors(&window, &cfg).unwrap());
    // sum over index triples of w[i0,i1,i2] * x[i0] x[i1] x[i2], x = [1, u_t, u_{t-1}]
    let x = [1.0, window[0], window[1]];
    let mut brute = 0.0;
    for i0 in 0..3 {
        for i1 in 0..3 {
            for i2 in 0..3 {
                brute += w[i0 * 9 + i1 * 3 + i2] * x[i0] * x[i1] * x[i2];
            }
        }
    }
    assert_relative_eq!(phi.dot(&w), brute, max_relative = 1e-13);
}

#[test]
fn volterra_prior_is_scaled_identity() {
    let cfg = VolterraConfig {
        dims: 3,
        basis: 3,
        lambda: 2.5,
    };
    let l0 = dense_kron(&volterra_prior(&cfg).unwrap().sqrt_factors);
    let p0 = &l0 * l0.transpose();
    assert!((p0 - DMatrix::identity(27, 27) * 2.5).amax() <= 1e-14);
    let four = VolterraConfig {
        dims: 2,
        basis: 2,
        lambda: 4.0,
    };
    assert_eq!(volterra_prior(&four).unwrap().dense_covariance(), DMatrix::identity(4, 4) * 4.0);
}

#[test]
fn constant_history_gives_constant_embedding() {
    let lags = LagConfig::default();
    let u = vec![2.5; 20];
    let y = vec![-1.0; 20];
    let a = lagged_io_embedding(&u, &y, 10, &lags).unwrap();
    let b = lagged_io_embedding(&u, &y, 15, &lags).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 14);
    assert!(a[..7].iter().all(|&v| v == 2.5) && a[7..].iter().all(|&v| v == -1.0));
}

#[test]
fn embedding_lag_order() {
    let lags = LagConfig {
        input_lags: vec![0, 2],
        output_lags: vec![1, 3],
    };
    let u: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = (0..10).map(|t| 100.0 + t as f64).collect();
    assert_eq!(lagged_io_embedding(&u, &y, 5, &lags).unwrap(), vec![5.0, 3.0, 104.0, 102.0]);
}

#[test]
fn scaler_maps_calibration_range_to_margin() {
    let mut r = rng(2);
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| vec![r.random_range(3.0..9.0), r.random_range(-20.0..-5.0)])
        .collect();
    let halves = [1.5, 2.0];
    let s = LagScaler::fit(&rows, &halves).unwrap();
    for k in 0..2 {
        let lo = rows.iter().map(|x| x[k]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|x| x[k]).fold(f64::NEG_INFINITY, f64::max);
        let mut probe = vec![0.0; 2];
        probe[k] = lo;
        probe[1 - k] = rows[0][1 - k];
        assert_relative_eq!(s.apply(&probe)[k], -0.9 * halves[k], max_relative = 1e-12);
        probe[k] = hi;
        assert_relative_eq!(s.apply(&probe)[k], 0.9 * halves[k], max_relative = 1e-12);
    }
    let far = s.apply_clamped(&[1e6, -1e6]);
    assert_eq!(far, vec![1.5, -2.0]);
}
