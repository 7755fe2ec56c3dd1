//! Shared helpers: seeded inputs, random operators and dense reference math
//! written independently of the library's train code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ttsrkf::features::{hilbert_se_factors, se_prior, PriorSpec, SeConfig};
use ttsrkf::tensor::{Canonical, Rank1FeatureTT, TensorTrain, TensorTrainMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn random_feature(modes: &[usize], rng: &mut ChaCha8Rng) -> Rank1FeatureTT {
    Rank1FeatureTT::new(modes.iter().map(|&n| DVector::from_fn(n, |_, _| normal(rng))).collect()).unwrap()
}

pub fn unit_feature(modes: &[usize], hot: &[usize]) -> Rank1FeatureTT {
    Rank1FeatureTT::new(
        modes
            .iter()
            .zip(hot)
            .map(|(&n, &h)| {
                let mut v = DVector::zeros(n);
                v[h] = 1.0;
                v
            })
            .collect(),
    )
    .unwrap()
}

/// Kronecker product of the feature factors, dimension 0 outermost.
pub fn dense_feature(phi: &Rank1FeatureTT) -> DVector<f64> {
    let mut out = DVector::from_element(1, 1.0);
    for f in phi.factors() {
        out = out.kronecker(f);
    }
    out
}

pub fn random_prior(rows: &[usize], cols: &[usize], rng: &mut ChaCha8Rng) -> PriorSpec {
    PriorSpec {
        sqrt_factors: rows.iter().zip(cols).map(|(&r, &c)| random_matrix(r, c, rng)).collect(),
    }
}

/// `kron_d A_d`.
pub fn dense_kron(factors: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(1, 1, 1.0);
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// Dense vector of a train over merged core modes, contracted by explicit
/// index loops rather than through the library.
pub fn dense_from_cores<T: Canonical>(x: &T) -> DVector<f64> {
    let cores = x.cores();
    let modes: Vec<usize> = cores.iter().map(|c| c.mode()).collect();
    let total: usize = modes.iter().product();
    let mut out = DVector::zeros(total);
    let mut digits = vec![0usize; modes.len()];
    for (pos, slot) in out.iter_mut().enumerate() {
        let mut rem = pos;
        for k in (0..modes.len()).rev() {
            digits[k] = rem % modes[k];
            rem /= modes[k];
        }
        let mut row = DVector::from_element(1, 1.0);
        for (k, c) in cores.iter().enumerate() {
            let (l, _, r) = c.shape();
            let next = DVector::from_fn(r, |b, _| (0..l).map(|a| row[a] * c.get(a, digits[k], b)).sum());
            row = next;
        }
        *slot = row[0];
    }
    out
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

pub fn rel_err_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// A seeded stream of SE inputs in `[-range, range]^D` with `U(-1, 1)` targets.
pub fn se_stream(cfg: &SeConfig, n: usize, range: f64, seed: u64) -> Vec<(Rank1FeatureTT, f64)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..cfg.dims()).map(|_| r.random_range(-range..range)).collect();
            let y = r.random_range(-1.0..1.0);
            (hilbert_se_factors(&x, cfg).unwrap(), y)
        })
        .collect()
}

pub fn se_setup(d: usize, basis: usize) -> (SeConfig, PriorSpec) {
    let cfg = SeConfig::isotropic(d, basis, 0.5, 1.0, 1.5);
    let prior = se_prior(&cfg).unwrap();
    (cfg, prior)
}

/// Sequential truncated SVD of a dense vector with the given modes; an
/// independent reference for TT rounding.
pub fn dense_tt_svd(values: &DVector<f64>, modes: &[usize], max_ranks: &[usize]) -> DVector<f64> {
    let d = modes.len();
    let mut factors: Vec<DMatrix<f64>> = Vec::new();
    let mut rest = DMatrix::from_row_slice(1, values.len(), values.as_slice());
    let mut r = 1;
    for k in 0..d - 1 {
        let cols = rest.len() / (r * modes[k]);
        // rows (a, i) with a fastest; `rest` is stored row-major in (a, i, tail)
        let mat = DMatrix::from_fn(r * modes[k], cols, |row, col| {
            let (a, i) = (row % r, row / r);
            rest[(a, i * cols + col)]
        });
        let svd = mat.svd(true, true);
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
        let keep = max_ranks[k + 1].min(idx.len());
        let u = svd.u.unwrap().select_columns(idx[..keep].iter());
        let s = DVector::from_iterator(keep, idx[..keep].iter().map(|&j| svd.singular_values[j]));
        let vt = svd.v_t.unwrap().select_rows(idx[..keep].iter());
        factors.push(u);
        rest = DMatrix::from_diagonal(&s) * vt;
        r = keep;
    }
    // contract back: value(i_0..i_{D-1}) = U_0[(1,i0),a1] U_1[(a1,i1),a2] ... rest[a_{D-1}, i_{D-1}]
    let total = values.len();
    let mut out = DVector::zeros(total);
    let mut digits = vec![0usize; d];
    for (pos, slot) in out.iter_mut().enumerate() {
        let mut rem = pos;
        for k in (0..d).rev() {
            digits[k] = rem % modes[k];
            rem /= modes[k];
        }
        let mut row = DVector::from_element(1, 1.0);
        for k in 0..d - 1 {
            let u = &factors[k];
            let rl = row.len();
            let rr = u.ncols();
            row = DVector::from_fn(rr, |b, _| (0..rl).map(|a| row[a] * u[(a + rl * digits[k], b)]).sum());
        }
        *slot = (0..row.len()).map(|a| row[a] * rest[(a, digits[d - 1])]).sum();
    }
    out
}

/// Dense covariance of a train matrix square root.
pub fn dense_gram(l: &TensorTrainMatrix) -> DMatrix<f64> {
    let m = l.to_dense().unwrap();
    &m * m.transpose()
}

pub fn random_tt(modes: &[usize], ranks: &[usize], seed: u64) -> TensorTrain {
    TensorTrain::random(modes, ranks, &mut rng(seed)).unwrap()
}
