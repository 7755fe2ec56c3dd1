//! Train and train-matrix operations against dense references.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::*;
use ttsrkf::tensor::{
    feasible_ranks, uniform_ranks, Canonical, Core3, Cores, Rank1FeatureTT, TensorTrain,
    TensorTrainMatrix,
};

#[test]
fn uniform_rank_four_shapes() {
    let x = random_tt(&[4, 4, 4], &uniform_ranks(3, 4), 0);
    let shapes: Vec<_> = (0..3).map(|k| x.core(k).shape()).collect();
    assert_eq!(shapes, vec![(1, 4, 4), (4, 4, 4), (4, 4, 1)]);
}

#[test]
fn rank_hundred_clips_to_feasible() {
    assert_eq!(feasible_ranks(&[4, 4, 4], &uniform_ranks(3, 100)).unwrap(), vec![1, 4, 4, 1]);
    let x = random_tt(&[4, 4, 4], &uniform_ranks(3, 100), 1);
    assert_eq!(x.ranks(), vec![1, 4, 4, 1]);
}

#[test]
fn same_seed_same_cores() {
    assert_eq!(random_tt(&[3, 4, 2], &[1, 3, 2, 1], 9), random_tt(&[3, 4, 2], &[1, 3, 2, 1], 9));
}

#[test]
fn to_dense_matches_loop_contraction() {
    let x = random_tt(&[3, 4, 2, 3], &[1, 3, 4, 2, 1], 2);
    let lib = x.to_dense().unwrap();
    assert!(rel_err_vec(&lib, &dense_from_cores(&x)) < 1e-14);
}

#[test]
fn dense_round_trip() {
    let x = random_tt(&[4, 4, 4], &[1, 3, 3, 1], 3);
    let dense = x.to_dense().unwrap();
    let back = TensorTrain::from_dense(&dense, &[4, 4, 4], &[1, 16, 16, 1], 0.0).unwrap();
    assert!((back.to_dense().unwrap() - &dense).amax() <= 1e-12);
}

#[test]
fn kron_factor_matrix_is_kron() {
    let mut r = rng(4);
    let a = random_matrix(2, 2, &mut r);
    let b = random_matrix(2, 2, &mut r);
    let l = TensorTrainMatrix::from_kron_factors(&[a.clone(), b.clone()]).unwrap();
    assert!((l.to_dense().unwrap() - a.kronecker(&b)).amax() < 1e-15);
}

#[test]
fn random_three_by_three_kron() {
    let mut r = rng(5);
    let f = vec![random_matrix(3, 3, &mut r), random_matrix(3, 3, &mut r)];
    let l = TensorTrainMatrix::from_kron_factors(&f).unwrap();
    assert!((l.to_dense().unwrap() - dense_kron(&f)).amax() <= 1e-14);
}

#[test]
fn identity_and_diagonal_factors() {
    let eye = TensorTrainMatrix::from_kron_factors(&vec![DMatrix::identity(2, 2); 3]).unwrap();
    assert_eq!(eye.to_dense().unwrap(), DMatrix::identity(8, 8));
    let half = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
    let l = TensorTrainMatrix::from_kron_factors(&vec![half; 3]).unwrap();
    let dense = l.to_dense().unwrap();
    for i in 0..8 {
        let expect = 0.5f64.powi((i as u32).count_ones() as i32);
        assert_eq!(dense[(i, i)], expect);
    }
    assert_eq!(dense.iter().filter(|v| **v != 0.0).count(), 8);
}

fn check_site_form<T: Canonical>(x: &T, site: usize) {
    for (k, c) in x.cores().iter().enumerate() {
        if k < site {
            let q = c.left_unfolding();
            let g = q.transpose() * q;
            assert!((g - DMatrix::identity(c.right(), c.right())).amax() < 1e-12);
        } else if k > site {
            let q = c.right_unfolding();
            let g = q * q.transpose();
            assert!((g - DMatrix::identity(c.left(), c.left())).amax() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonicalization_keeps_dense_value(
        modes in prop::collection::vec(1usize..=4, 1..=5),
        rank in 1usize..=4,
        seed in 0u64..1000,
        site_pick in 0usize..5,
    ) {
        let d = modes.len();
        let site = site_pick % d;
        let x = random_tt(&modes, &uniform_ranks(d, rank), seed);
        let before = x.to_dense().unwrap();
        let scale = before.amax().max(1.0);
        let mut y = x.clone();
        y.orthogonalize_site(site).unwrap();
        check_site_form(&y, site);
        prop_assert!((y.to_dense().unwrap() - &before).amax() <= 1e-12 * scale);
        // walk to the last site and back
        y.orthogonalize_site(d - 1).unwrap();
        y.orthogonalize_site(0).unwrap();
        check_site_form(&y, 0);
        prop_assert!((y.to_dense().unwrap() - &before).amax() <= 1e-12 * scale);
    }
}

#[test]
fn first_and_last_site_agree() {
    let x = random_tt(&[3, 4, 4, 2], &[1, 3, 4, 2, 1], 6);
    let mut a = x.clone();
    a.orthogonalize_site(0).unwrap();
    let mut b = x.clone();
    b.orthogonalize_site(3).unwrap();
    assert!((a.to_dense().unwrap() - b.to_dense().unwrap()).amax() < 1e-12);
    let mut c = x.clone();
    c.orthogonalize_site(2).unwrap();
    let q = c.core(1).left_unfolding();
    assert!((q.transpose() * q - DMatrix::identity(c.core(1).right(), c.core(1).right())).amax() < 1e-12);
}

#[test]
fn matrix_frame_is_orthonormal_and_spans_the_factor() {
    let mut r = rng(7);
    let mut l = TensorTrainMatrix::random(&[2, 2, 2], &[2, 2, 2], &[1, 3, 3, 1], 1, 2, 1.0, &mut r).unwrap();
    for site in 0..3 {
        l.orthogonalize_site(site).unwrap();
        let frame = l.frame().unwrap();
        let f = frame.to_dense().unwrap();
        let g = f.transpose() * &f;
        assert!((&g - DMatrix::identity(g.nrows(), g.ncols())).amax() < 1e-12, "site {site}");
        let core = DVector::from_column_slice(l.core(site).data());
        assert!(rel_err_vec(&(&f * core), &dense_from_cores(&l)) < 1e-12);
    }
}

#[test]
fn unit_vector_dot_is_one() {
    let e = unit_feature(&[2, 2], &[0, 0]).to_tt();
    assert_eq!(e.dot(&e).unwrap(), 1.0);
}

#[test]
fn dot_matches_dense() {
    let x = random_tt(&[4, 4, 4], &[1, 3, 4, 1], 10);
    let y = random_tt(&[4, 4, 4], &[1, 2, 3, 1], 11);
    let dense = x.to_dense().unwrap().dot(&y.to_dense().unwrap());
    assert!((x.dot(&y).unwrap() - dense).abs() <= 1e-12 * dense.abs().max(1.0));
}

#[test]
fn canonical_self_dot_is_center_norm() {
    let mut x = random_tt(&[4, 3, 4], &[1, 3, 3, 1], 12);
    x.orthogonalize_site(1).unwrap();
    let expect = x.core(1).norm_squared();
    assert!((x.dot(&x).unwrap() - expect).abs() <= 1e-12 * expect);
    assert!((x.norm_squared() - expect).abs() <= 1e-12 * expect);
}

#[test]
fn transpose_apply_of_diagonal_kron() {
    let diags: Vec<DMatrix<f64>> = [vec![1.0, 2.0], vec![3.0, 5.0], vec![7.0, 11.0]]
        .into_iter()
        .map(|d| DMatrix::from_diagonal(&DVector::from_vec(d)))
        .collect();
    let l = TensorTrainMatrix::from_kron_factors(&diags).unwrap();
    for hot in [[0, 0, 0], [1, 0, 1], [1, 1, 1]] {
        let v = l.transpose_apply(&unit_feature(&[2, 2, 2], &hot)).unwrap();
        assert_eq!(v.ranks(), vec![1, 1, 1, 1]);
        let dense = v.to_dense().unwrap();
        let idx = hot[0] * 4 + hot[1] * 2 + hot[2];
        let expect: f64 = (0..3).map(|d| diags[d][(hot[d], hot[d])]).product();
        assert_eq!(dense[idx], expect);
        assert_eq!(dense.iter().filter(|x| **x != 0.0).count(), 1);
    }
}

#[test]
fn transpose_apply_matches_dense() {
    let mut r = rng(13);
    let l = TensorTrainMatrix::random(&[2, 2, 2], &[2, 2, 2], &[1, 3, 2, 1], 1, 2, 1.0, &mut r).unwrap();
    let phi = random_feature(&[2, 2, 2], &mut r);
    let v = l.transpose_apply(&phi).unwrap();
    assert_eq!(v.ranks(), l.ranks());
    let oracle = l.to_dense().unwrap().transpose() * dense_feature(&phi);
    assert!((l.column_tt_to_dense(&v).unwrap() - &oracle).amax() <= 1e-12 * oracle.amax().max(1.0));
}

#[test]
fn identity_apply_returns_input() {
    let eye = TensorTrainMatrix::from_kron_factors(&vec![DMatrix::identity(3, 3); 3]).unwrap();
    let v = random_tt(&[3, 3, 3], &[1, 2, 2, 1], 14);
    let out = eye.apply(&v).unwrap();
    assert!((out.to_dense().unwrap() - v.to_dense().unwrap()).amax() < 1e-15);
}

#[test]
fn apply_multiplies_ranks_and_matches_dense() {
    let mut r = rng(15);
    let l = TensorTrainMatrix::random(&[2, 2, 2], &[2, 2, 2], &[1, 2, 2, 1], 2, 2, 1.0, &mut r).unwrap();
    let v = TensorTrain::random(&l.effective_col_sizes(), &[1, 2, 2, 1], &mut r).unwrap();
    let mut out = l.apply(&v).unwrap();
    assert!(out.ranks().iter().all(|&x| x <= 4));
    let oracle = l.to_dense().unwrap() * l.column_tt_to_dense(&v).unwrap();
    assert!((out.to_dense().unwrap() - &oracle).amax() <= 1e-12 * oracle.amax().max(1.0));
    // the rank bound is reached once the redundancy is removed
    let mut big_r = rng(16);
    let l4 = TensorTrainMatrix::random(&[4, 4, 4, 4], &[1, 1, 1, 1], &[1, 2, 2, 2, 1], 0, 1, 1.0, &mut big_r).unwrap();
    let v4 = TensorTrain::random(&[1, 1, 1, 1], &[1, 1, 1, 1, 1], &mut big_r).unwrap();
    assert_eq!(l4.apply(&v4).unwrap().ranks(), vec![1, 2, 2, 2, 1]);
    let w = TensorTrain::random(&[4, 4, 4, 4], &[1, 2, 2, 2, 1], &mut big_r).unwrap();
    let sq = TensorTrainMatrix::random(&[4, 4, 4, 4], &[4, 4, 4, 4], &[1, 2, 2, 2, 1], 0, 1, 1.0, &mut big_r).unwrap();
    let mut prod = sq.apply(&w).unwrap();
    prod.compress();
    assert_eq!(prod.ranks(), vec![1, 4, 4, 4, 1]);
    out.compress();
    assert!((out.to_dense().unwrap() - &oracle).amax() <= 1e-12 * oracle.amax().max(1.0));
}

#[test]
fn rounding_at_current_ranks_is_exact() {
    let mut x = random_tt(&[4, 4, 4], &[1, 3, 3, 1], 17);
    let before = x.to_dense().unwrap();
    x.round(&[1, 3, 3, 1], 0.0).unwrap();
    assert!((x.to_dense().unwrap() - &before).amax() <= 1e-12 * before.amax());
}

#[test]
fn sum_of_parallel_rank_one_trains_rounds_to_rank_one() {
    let mut r = rng(18);
    let phi = random_feature(&[3, 4, 2], &mut r);
    let a = phi.to_tt();
    let mut b = phi.to_tt();
    b.scale(2.0);
    let mut s = a.add(&b).unwrap();
    assert_eq!(s.ranks(), vec![1, 2, 2, 1]);
    s.round(&[1, 1, 1, 1], 0.0).unwrap();
    assert_eq!(s.ranks(), vec![1, 1, 1, 1]);
    let expect = dense_feature(&phi) * 3.0;
    assert!((s.to_dense().unwrap() - &expect).amax() <= 1e-12 * expect.amax());
}

#[test]
fn matrix_rounding_matches_sequential_svd() {
    let mut r = rng(19);
    let mut l = TensorTrainMatrix::random(&[2, 2, 2, 2], &[2, 2, 2, 2], &[1, 6, 6, 6, 1], 1, 1, 1.0, &mut r).unwrap();
    assert_eq!(l.ranks(), vec![1, 4, 6, 4, 1]);
    let before = dense_from_cores(&l);
    let modes = vec![4; 4];
    let target = [1, 2, 2, 2, 1];
    let oracle = dense_tt_svd(&before, &modes, &target);
    l.round(&target, 0.0).unwrap();
    assert_eq!(l.ranks(), target.to_vec());
    let after = dense_from_cores(&l);
    assert!((&after - &oracle).amax() <= 1e-10 * before.amax());
    let err_lib = (&after - &before).norm();
    let err_oracle = (&oracle - &before).norm();
    assert!((err_lib - err_oracle).abs() <= 1e-10 * before.norm());
}

#[test]
fn rounding_tolerance_bounds_the_error() {
    let mut x = random_tt(&[4, 4, 4, 4], &[1, 4, 8, 4, 1], 20);
    let before = x.to_dense().unwrap();
    x.round(&[1, 16, 16, 16, 1], 0.3).unwrap();
    let err = (x.to_dense().unwrap() - &before).norm();
    assert!(err <= 0.3 * before.norm() * (1.0 + 1e-12));
}

#[test]
fn sums_scales_and_outer_products_match_dense() {
    let x = random_tt(&[3, 2, 4], &[1, 2, 3, 1], 21);
    let y = random_tt(&[3, 2, 4], &[1, 3, 2, 1], 22);
    let mut z = x.add(&y).unwrap();
    z.scale(-1.5);
    let expect = (x.to_dense().unwrap() + y.to_dense().unwrap()) * -1.5;
    assert!((z.to_dense().unwrap() - &expect).amax() < 1e-12);

    let b = random_tt(&[2, 2, 3], &[1, 2, 2, 1], 23);
    let o = TensorTrainMatrix::outer(&x, &b, 1).unwrap();
    let expect = x.to_dense().unwrap() * b.to_dense().unwrap().transpose();
    assert!((o.to_dense().unwrap() - expect).amax() < 1e-12);
}

#[test]
fn padding_keeps_the_factor_and_appends_zero_columns() {
    let mut r = rng(24);
    let l = TensorTrainMatrix::random(&[2, 3, 2], &[2, 2, 3], &[1, 3, 3, 1], 1, 2, 1.0, &mut r).unwrap();
    let p = l.pad_aug_columns(4).unwrap();
    let (dl, dp) = (l.to_dense().unwrap(), p.to_dense().unwrap());
    assert_eq!(dp.ncols(), 2 * dl.ncols());
    assert_eq!(dp.columns(0, dl.ncols()), dl.columns(0, dl.ncols()));
    assert!(dp.columns(dl.ncols(), dl.ncols()).iter().all(|v| *v == 0.0));
}

#[test]
fn projection_onto_own_frame_returns_center_core() {
    let mut x = random_tt(&[3, 4, 3], &[1, 3, 3, 1], 25);
    x.orthogonalize_site(1).unwrap();
    let frame = x.frame().unwrap();
    let p = frame.project(&Cores(x.cores()));
    let diff: f64 = p.data().iter().zip(x.core(1).data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12);
}

#[test]
fn frame_projection_matches_dense_transpose() {
    let mut x = random_tt(&[3, 4, 3], &[1, 2, 3, 1], 26);
    let y = random_tt(&[3, 4, 3], &[1, 3, 2, 1], 27);
    x.orthogonalize_site(2).unwrap();
    let frame = x.frame().unwrap();
    let p = frame.project(&Cores(y.cores()));
    let oracle = frame.to_dense().unwrap().transpose() * y.to_dense().unwrap();
    let got = DVector::from_column_slice(p.data());
    assert!((got - oracle).amax() < 1e-12);
}

#[test]
fn core_from_fn_layout() {
    let c = Core3::from_fn(2, 3, 2, |a, i, b| (a + 10 * i + 100 * b) as f64);
    assert_eq!(c.data()[1 + 2 * (2 + 3)], 121.0);
    assert_eq!(c.left_unfolding()[(1 + 2 * 2, 1)], 121.0);
    assert_eq!(c.right_unfolding()[(1, 2 + 3)], 121.0);
}

#[test]
fn feature_train_is_rank_one() {
    let mut r = rng(28);
    let phi = random_feature(&[2, 3, 4], &mut r);
    let t = phi.to_tt();
    assert_eq!(t.ranks(), vec![1, 1, 1, 1]);
    assert!((t.to_dense().unwrap() - dense_feature(&phi)).amax() < 1e-15);
    let w = random_tt(&[2, 3, 4], &[1, 2, 3, 1], 29);
    let expect = dense_feature(&phi).dot(&w.to_dense().unwrap());
    assert!((phi.dot_tt(&w).unwrap() - expect).abs() < 1e-12);
    assert!(Rank1FeatureTT::new(vec![]).is_err());
}
