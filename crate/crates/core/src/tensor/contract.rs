//! Environment contractions between two trains sharing mode sizes.
//!
//! An environment is the partial inner product of train `x` with train `y`
//! over a prefix (left) or suffix (right) of cores, stored as an
//! `x-rank x y-rank` matrix.

use nalgebra::{DMatrix, DMatrixView};

use super::Core3;

/// Extends a left environment `(x.left x y.left)` over one pair of cores.
pub(crate) fn left_step(env: &DMatrix<f64>, x: &Core3, y: &Core3) -> DMatrix<f64> {
    debug_assert_eq!(env.shape(), (x.left(), y.left()));
    debug_assert_eq!(x.mode(), y.mode());
    // z[y, i, x'] = sum_a env[a, y] x[a, i, x']
    let z = env.transpose() * x.right_unfolding();
    let z_left = DMatrixView::from_slice(z.as_slice(), y.left() * y.mode(), x.right());
    z_left.transpose() * y.left_unfolding()
}

/// Extends a right environment `(x.right x y.right)` over one pair of cores.
pub(crate) fn right_step(env: &DMatrix<f64>, x: &Core3, y: &Core3) -> DMatrix<f64> {
    debug_assert_eq!(env.shape(), (x.right(), y.right()));
    debug_assert_eq!(x.mode(), y.mode());
    // z[y, i, x'] = sum_y' y[y, i, y'] env[x', y']
    let z = y.left_unfolding() * env.transpose();
    let z_right = DMatrixView::from_slice(z.as_slice(), y.left(), y.mode() * x.right());
    x.right_unfolding() * z_right.transpose()
}

/// Contracts core `y` with a left and a right environment, leaving the
/// mode index open: `out[x, i, x'] = sum left[x, y] y[y, i, y'] right[x', y']`.
pub(crate) fn local_project(left: &DMatrix<f64>, y: &Core3, right: &DMatrix<f64>) -> Core3 {
    debug_assert_eq!(left.ncols(), y.left());
    debug_assert_eq!(right.ncols(), y.right());
    let z = left * y.right_unfolding();
    let z_left = DMatrixView::from_slice(z.as_slice(), left.nrows() * y.mode(), y.right());
    let out = z_left * right.transpose();
    Core3::from_left_unfolding(out, left.nrows(), y.mode())
}

/// Full inner product of two trains with identical mode sizes.
pub(crate) fn inner(x: &[Core3], y: &[Core3]) -> f64 {
    let mut env = DMatrix::from_element(1, 1, 1.0);
    for (a, b) in x.iter().zip(y) {
        env = left_step(&env, a, b);
    }
    env[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn core(l: usize, n: usize, r: usize, seed: usize) -> Core3 {
        Core3::from_fn(l, n, r, |a, i, b| {
            (((a * 7 + i * 13 + b * 3 + seed * 11) % 17) as f64 - 8.0) / 5.0
        })
    }

    #[test]
    fn left_step_matches_loops() {
        let x = core(2, 3, 4, 1);
        let y = core(3, 3, 2, 2);
        let env = DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64 - 1.5);
        let got = left_step(&env, &x, &y);
        for xp in 0..4 {
            for yp in 0..2 {
                let mut want = 0.0;
                for a in 0..2 {
                    for b in 0..3 {
                        for i in 0..3 {
                            want += env[(a, b)] * x.get(a, i, xp) * y.get(b, i, yp);
                        }
                    }
                }
                assert!((got[(xp, yp)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn right_step_and_project_match_loops() {
        let x = core(2, 3, 4, 3);
        let y = core(3, 3, 2, 4);
        let env = DMatrix::from_fn(4, 2, |i, j| (3 * i + j) as f64 * 0.1 - 0.4);
        let got = right_step(&env, &x, &y);
        for a in 0..2 {
            for b in 0..3 {
                let mut want = 0.0;
                for xp in 0..4 {
                    for yp in 0..2 {
                        for i in 0..3 {
                            want += x.get(a, i, xp) * y.get(b, i, yp) * env[(xp, yp)];
                        }
                    }
                }
                assert!((got[(a, b)] - want).abs() < 1e-12);
            }
        }

        let left = DMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.3 - 0.7);
        let proj = local_project(&left, &y, &env);
        assert_eq!(proj.shape(), (2, 3, 4));
        for a in 0..2 {
            for i in 0..3 {
                for xp in 0..4 {
                    let mut want = 0.0;
                    for b in 0..3 {
                        for yp in 0..2 {
                            want += left[(a, b)] * y.get(b, i, yp) * env[(xp, yp)];
                        }
                    }
                    assert!((proj.get(a, i, xp) - want).abs() < 1e-12);
                }
            }
        }
    }
}
