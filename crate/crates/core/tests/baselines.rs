//! Reference filters against closed-form and batch posteriors.

mod common;

use nalgebra::{DMatrix, DVector};

use common::*;
use ttsrkf::baselines::{DenseKf, DenseSrkf, Tnkf, TnkfConfig};
use ttsrkf::features::PriorSpec;
use ttsrkf::filter::OnlineFilter;
use ttsrkf::tensor::uniform_ranks;

#[test]
fn huge_noise_leaves_the_state_unchanged() {
    let (cfg, prior) = se_setup(2, 3);
    let mut kf = DenseKf::new(&prior, 1e30).unwrap();
    let (m0, p0) = (kf.mean.clone(), kf.cov.clone());
    for (phi, y) in se_stream(&cfg, 5, 1.0, 1) {
        kf.update(&phi, y).unwrap();
    }
    assert!((&kf.mean - m0).amax() <= 1e-25);
    assert!(rel_err_fro(&kf.cov, &p0) <= 1e-25);
}

#[test]
fn scalar_state_closed_form() {
    let prior = PriorSpec {
        sqrt_factors: vec![DMatrix::from_element(1, 1, 2.0)],
    };
    let (p0, noise, phi, y) = (4.0, 0.5, 1.5, 0.8);
    let mut kf = DenseKf::new(&prior, noise).unwrap();
    kf.update_dense(&DVector::from_element(1, phi), y).unwrap();
    let s = phi * phi * p0 + noise;
    assert!((kf.mean[0] - p0 * phi * y / s).abs() <= 1e-15);
    assert!((kf.cov[(0, 0)] - p0 * noise / s).abs() <= 1e-15);
}

#[test]
fn sequential_updates_equal_the_batch_posterior() {
    let mut r = rng(3);
    let prior = random_prior(&[3, 2], &[3, 2], &mut r);
    let p0 = prior.dense_covariance();
    let noise = 0.3;
    let n = 12;
    let phis = random_matrix(n, 6, &mut r);
    let ys = random_matrix(n, 1, &mut r).column(0).into_owned();
    let mut kf = DenseKf::new(&prior, noise).unwrap();
    for t in 0..n {
        kf.update_dense(&phis.row(t).transpose(), ys[t]).unwrap();
    }
    let info = p0.try_inverse().unwrap() + phis.transpose() * &phis / noise;
    let post = info.try_inverse().unwrap();
    let mean = &post * phis.transpose() * &ys / noise;
    assert!(rel_err_fro(&kf.cov, &post) <= 1e-9);
    assert!(rel_err_vec(&kf.mean, &mean) <= 1e-9);

    // unit features with unit noise: (P0^-1 + I)^-1
    let mut unit = DenseKf::new(&prior, 1.0).unwrap();
    for i in 0..6 {
        let mut e = DVector::zeros(6);
        e[i] = 1.0;
        unit.update_dense(&e, 0.0).unwrap();
    }
    let inv = (prior.dense_covariance().try_inverse().unwrap() + DMatrix::identity(6, 6)).try_inverse().unwrap();
    assert!(rel_err_fro(&unit.cov, &inv) <= 1e-10);
}

#[test]
fn square_root_filter_equals_the_dense_filter() {
    let (cfg, prior) = se_setup(3, 3);
    let mut kf = DenseKf::new(&prior, 0.01).unwrap();
    let mut srkf = DenseSrkf::new(&prior, 0.01).unwrap();
    for (phi, y) in se_stream(&cfg, 40, 1.0, 5) {
        kf.update(&phi, y).unwrap();
        srkf.update(&phi, y).unwrap();
        let p = srkf.dense_covariance().unwrap();
        assert!(rel_err_fro(&p, &kf.cov) <= 1e-9);
    }
    assert!(rel_err_vec(&srkf.mean, &kf.mean) <= 1e-9);
    let (phi, _) = se_stream(&cfg, 1, 1.0, 6).remove(0);
    let (a, b) = (kf.predict(&phi).unwrap(), srkf.predict(&phi).unwrap());
    assert!((a.mean - b.mean).abs() <= 1e-9 && (a.variance - b.variance).abs() <= 1e-9 * a.variance);
}

#[test]
fn dense_cap_is_enforced() {
    let (_, prior) = se_setup(3, 4);
    assert!(DenseKf::with_cap(&prior, 0.1, 63).is_err());
    assert!(DenseSrkf::with_cap(&prior, 0.1, 64).is_ok());
}

#[test]
fn tnkf_pre_round_ranks_grow_by_the_gain_outer_product() {
    let (cfg, prior) = se_setup(3, 3);
    let mut f = Tnkf::new(
        &prior,
        TnkfConfig {
            mean_ranks: uniform_ranks(3, 3),
            cov_ranks: uniform_ranks(3, 2),
            rel_tol: 0.0,
            noise_var: 0.1,
        },
    )
    .unwrap();
    assert!(f.last_pre_round_ranks().is_none());
    let stream = se_stream(&cfg, 2, 1.0, 7);
    f.step(&stream[0].0, stream[0].1).unwrap();
    assert_eq!(f.last_pre_round_ranks(), Some(&[1, 2, 2, 1][..]));
    f.step(&stream[1].0, stream[1].1).unwrap();
    // R_P + R_K^2 with R_P = R_K = 2
    assert_eq!(f.last_pre_round_ranks(), Some(&[1, 6, 6, 1][..]));
}

#[test]
fn full_rank_tnkf_tracks_the_dense_filter() {
    let (cfg, prior) = se_setup(2, 3);
    let mut f = Tnkf::new(
        &prior,
        TnkfConfig {
            mean_ranks: uniform_ranks(2, 100),
            cov_ranks: uniform_ranks(2, 100),
            rel_tol: 0.0,
            noise_var: 0.05,
        },
    )
    .unwrap();
    let mut kf = DenseKf::new(&prior, 0.05).unwrap();
    for (phi, y) in se_stream(&cfg, 30, 1.0, 8) {
        f.update(&phi, y).unwrap();
        kf.update(&phi, y).unwrap();
    }
    assert!(rel_err_vec(&f.dense_mean().unwrap(), &kf.mean) <= 1e-8);
    assert!(rel_err_fro(&f.dense_covariance().unwrap(), &kf.cov) <= 1e-8);
}
