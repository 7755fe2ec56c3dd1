//! Dense factorizations with the conventions the tensor code relies on.
//!
//! QR factors have a nonnegative R diagonal and SVD triplets come sorted by
//! descending singular value, so repeated runs produce identical cores.

use nalgebra::{DMatrix, DVector};

/// Thin Householder QR `a = q * r` with `q` of size m x k and `r` of size
/// k x n, k = min(m, n). Rows of `r` are sign-flipped so its diagonal is >= 0.
pub fn qr_positive(a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Thin SVD with singular values sorted descending (stable on ties).
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn svd_sorted(a: DMatrix<f64>) -> SortedSvd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return SortedSvd {
            u: DMatrix::zeros(m, 0),
            s: DVector::zeros(0),
            v_t: DMatrix::zeros(0, n),
        };
    }
    let svd = a.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    SortedSvd {
        u: u.select_columns(order.iter()),
        s: DVector::from_iterator(order.len(), order.iter().map(|&i| s[i])),
        v_t: v_t.select_rows(order.iter()),
    }
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized first).
pub fn min_symmetric_eigenvalue(p: &DMatrix<f64>) -> f64 {
    let sym = (p + p.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Kronecker product in the usual left-outermost order.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}
