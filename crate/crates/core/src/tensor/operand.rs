//! Operands a projection sweep can contract against.
//!
//! An environment between iterate `x` and an operand is an
//! `x-rank x operand-rank` matrix. [`Cores`] is an explicit chain of cores;
//! [`KronOperand`] is the train matrix `a b^T` given by a row train `a` and a
//! column train `b`, contracted factor by factor so the rank-product cores
//! are never formed. Its environment column index is `p + ra * q` for row
//! rank `p` and column rank `q`.

use nalgebra::DMatrix;

use super::contract::{left_step, local_project, right_step};
use super::Core3;

pub trait SweepOperand {
    fn num_cores(&self) -> usize;

    /// Mode size of core `k` (merged for train matrices).
    fn mode(&self, k: usize) -> usize;

    fn left_step(&self, env: &DMatrix<f64>, x: &Core3, k: usize) -> DMatrix<f64>;

    fn right_step(&self, env: &DMatrix<f64>, x: &Core3, k: usize) -> DMatrix<f64>;

    /// Core-`k` contribution with the mode index left open; the result has
    /// shape `(left.nrows(), mode(k), right.nrows())`.
    fn project(&self, left: &DMatrix<f64>, right: &DMatrix<f64>, k: usize) -> Core3;
}

/// An explicit chain of cores.
#[derive(Clone, Copy, Debug)]
pub struct Cores<'a>(pub &'a [Core3]);

impl SweepOperand for Cores<'_> {
    fn num_cores(&self) -> usize {
        self.0.len()
    }

    fn mode(&self, k: usize) -> usize {
        self.0[k].mode()
    }

    fn left_step(&self, env: &DMatrix<f64>, x: &Core3, k: usize) -> DMatrix<f64> {
        left_step(env, x, &self.0[k])
    }

    fn right_step(&self, env: &DMatrix<f64>, x: &Core3, k: usize) -> DMatrix<f64> {
        right_step(env, x, &self.0[k])
    }

    fn project(&self, left: &DMatrix<f64>, right: &DMatrix<f64>, k: usize) -> Core3 {
        local_project(left, &self.0[k], right)
    }
}

/// The train matrix `rows cols^T` with merged index `i + I * c`.
#[derive(Clone, Copy, Debug)]
pub struct KronOperand<'a> {
    pub rows: &'a [Core3],
    pub cols: &'a [Core3],
}

impl KronOperand<'_> {
    /// `u[(x + lx (i + ni x')), (y + vy y')] = sum_c x[x, i + ni c, x'] b[y, c, y']`.
    fn fuse_cols(&self, x: &Core3, k: usize) -> DMatrix<f64> {
        let (lx, _, rx) = x.shape();
        let ni = self.rows[k].mode();
        let v = &self.cols[k];
        let (vy, nc, vy2) = v.shape();
        debug_assert_eq!(x.mode(), ni * nc);
        let xp = DMatrix::from_fn(lx * ni * rx, nc, |row, c| {
            let xx = row % lx;
            let i = (row / lx) % ni;
            let xr = row / (lx * ni);
            x.get(xx, i + ni * c, xr)
        });
        let vp = DMatrix::from_fn(nc, vy * vy2, |c, col| v.get(col % vy, c, col / vy));
        xp * vp
    }
}

impl SweepOperand for KronOperand<'_> {
    fn num_cores(&self) -> usize {
        self.rows.len()
    }

    fn mode(&self, k: usize) -> usize {
        self.rows[k].mode() * self.cols[k].mode()
    }

    fn left_step(&self, env: &DMatrix<f64>, x: &Core3, k: usize) -> DMatrix<f64> {
        let (lx, _, rx) = x.shape();
        let kc = &self.rows[k];
        let (ka, ni, ka2) = kc.shape();
        let (vy, _, vy2) = self.cols[k].shape();
        let u = self.fuse_cols(x, k);
        let ep = DMatrix::from_fn(lx * vy, ka, |row, a| env[(row % lx, a + ka * (row / lx))]);
        // w[(x, y), (i, a')]
        let w = ep * kc.right_unfolding();
        let wp = DMatrix::from_fn(lx * vy * ni, ka2, |row, a2| {
            let xx = row % lx;
            let y = (row / lx) % vy;
            let i = row / (lx * vy);
            w[(xx + lx * y, i + ni * a2)]
        });
        let up = DMatrix::from_fn(lx * vy * ni, rx * vy2, |row, col| {
            let xx = row % lx;
            let y = (row / lx) % vy;
            let i = row / (lx * vy);
            let (xr, y2) = (col % rx, col / rx);
            u[(xx + lx * (i + ni * xr), y + vy * y2)]
        });
        let r = wp.transpose() * up;
        DMatrix::from_fn(rx, ka2 * vy2, |xr, col| {
            let (a2, y2) = (col % ka2, col / ka2);
            r[(a2, xr + rx * y2)]
        })
    }

    fn right_step(&self, env: &DMatrix<f64>, x: &Core3, k: usize) -> DMatrix<f64> {
        let (lx, _, rx) = x.shape();
        let kc = &self.rows[k];
        let (ka, ni, ka2) = kc.shape();
        let (vy, _, vy2) = self.cols[k].shape();
        let u = self.fuse_cols(x, k);
        let ep = DMatrix::from_fn(rx * vy2, ka2, |row, a2| env[(row % rx, a2 + ka2 * (row / rx))]);
        let kq = DMatrix::from_fn(ka2, ka * ni, |a2, col| kc.get(col % ka, col / ka, a2));
        // w[(x', y'), (a, i)]
        let w = ep * kq;
        let up = DMatrix::from_fn(lx * vy, rx * vy2 * ni, |row, col| {
            let (xx, y) = (row % lx, row / lx);
            let xr = col % rx;
            let y2 = (col / rx) % vy2;
            let i = col / (rx * vy2);
            u[(xx + lx * (i + ni * xr), y + vy * y2)]
        });
        let wp = DMatrix::from_fn(rx * vy2 * ni, ka, |row, a| {
            let xr = row % rx;
            let y2 = (row / rx) % vy2;
            let i = row / (rx * vy2);
            w[(xr + rx * y2, a + ka * i)]
        });
        let r = up * wp;
        DMatrix::from_fn(lx, ka * vy, |xx, col| {
            let (a, y) = (col % ka, col / ka);
            r[(xx + lx * y, a)]
        })
    }

    fn project(&self, left: &DMatrix<f64>, right: &DMatrix<f64>, k: usize) -> Core3 {
        let (lx, rx) = (left.nrows(), right.nrows());
        let kc = &self.rows[k];
        let (ka, ni, ka2) = kc.shape();
        let v = &self.cols[k];
        let (vy, nc, vy2) = v.shape();
        let lp = DMatrix::from_fn(lx * vy, ka, |row, a| left[(row % lx, a + ka * (row / lx))]);
        // a_[(x, y), (i, a')]
        let a_ = lp * kc.right_unfolding();
        let ap = DMatrix::from_fn(lx * vy * ni, ka2, |row, a2| {
            let xx = row % lx;
            let y = (row / lx) % vy;
            let i = row / (lx * vy);
            a_[(xx + lx * y, i + ni * a2)]
        });
        let rp = DMatrix::from_fn(ka2, rx * vy2, |a2, col| {
            let (xr, y2) = (col % rx, col / rx);
            right[(xr, a2 + ka2 * y2)]
        });
        // b[(x, y, i), (x', y')]
        let b = ap * rp;
        let bp = DMatrix::from_fn(lx * ni * rx, vy * vy2, |row, col| {
            let xx = row % lx;
            let i = (row / lx) % ni;
            let xr = row / (lx * ni);
            let (y, y2) = (col % vy, col / vy);
            b[(xx + lx * (y + vy * i), xr + rx * y2)]
        });
        let vt = DMatrix::from_fn(vy * vy2, nc, |col, c| v.get(col % vy, c, col / vy));
        let o = bp * vt;
        let mut out = Core3::zeros(lx, ni * nc, rx);
        for c in 0..nc {
            for xr in 0..rx {
                for i in 0..ni {
                    for xx in 0..lx {
                        out.set(xx, i + ni * c, xr, o[(xx + lx * (i + ni * xr), c)]);
                    }
                }
            }
        }
        out
    }
}
