//! Site-d mixed canonical form, canonical shifts and SVD rounding.
//!
//! Everything here acts on the cores alone, so trains and train matrices
//! (whose cores carry a merged row/column mode) share one implementation.

use nalgebra::DMatrix;

use super::Core3;
use crate::error::{Error, Result};
use crate::linalg::{qr_positive, svd_sorted};

/// Direction of a single canonical-site shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// Left-orthogonalizes core `k` and pushes the R factor into core `k + 1`.
pub(crate) fn left_orthogonalize_core(cores: &mut [Core3], k: usize) {
    let (l, n, _) = cores[k].shape();
    let (q, r) = qr_positive(cores[k].left_unfolding().into_owned());
    cores[k] = Core3::from_left_unfolding(q, l, n);
    let next = &cores[k + 1];
    let (_, n1, r1) = next.shape();
    let merged = r * next.right_unfolding();
    cores[k + 1] = Core3::from_right_unfolding(merged, n1, r1);
}

/// Right-orthogonalizes core `k` and pushes the L factor into core `k - 1`.
pub(crate) fn right_orthogonalize_core(cores: &mut [Core3], k: usize) {
    let (_, n, r) = cores[k].shape();
    let (q, rr) = qr_positive(cores[k].right_unfolding().transpose());
    cores[k] = Core3::from_right_unfolding(q.transpose(), n, r);
    let prev = &cores[k - 1];
    let (l0, n0, _) = prev.shape();
    let merged = prev.left_unfolding() * rr.transpose();
    cores[k - 1] = Core3::from_left_unfolding(merged, l0, n0);
}

/// Truncation rank for a descending spectrum: the smallest rank whose tail
/// energy is at most `threshold_sq`, capped by `max_rank`, at least 1.
pub(crate) fn truncation_rank(s: &[f64], max_rank: usize, threshold_sq: f64) -> usize {
    let mut tail = 0.0;
    let mut keep = s.len();
    while keep > 1 {
        let next = tail + s[keep - 1] * s[keep - 1];
        if next > threshold_sq {
            break;
        }
        tail = next;
        keep -= 1;
    }
    keep.min(max_rank).max(1)
}

/// Shared canonical-form machinery for [`TensorTrain`](super::TensorTrain)
/// and [`TensorTrainMatrix`](super::TensorTrainMatrix).
pub trait Canonical {
    fn cores(&self) -> &[Core3];
    fn cores_mut(&mut self) -> &mut Vec<Core3>;
    fn canonical_site(&self) -> Option<usize>;
    fn set_canonical_site(&mut self, site: Option<usize>);

    fn num_cores(&self) -> usize {
        self.cores().len()
    }

    /// Bond dimensions `R_0 .. R_D` with `R_0 = R_D = 1`.
    fn ranks(&self) -> Vec<usize> {
        let cores = self.cores();
        let mut r: Vec<usize> = cores.iter().map(Core3::left).collect();
        r.push(cores.last().map_or(1, Core3::right));
        r
    }

    /// Brings the train into site-`site` mixed canonical form. Only the cores
    /// between the current and the requested site are touched.
    fn orthogonalize_site(&mut self, site: usize) -> Result<()> {
        let d = self.num_cores();
        if site >= d {
            return Err(Error::invalid(format!(
                "canonical site {site} out of range for {d} cores"
            )));
        }
        let (lo, hi) = match self.canonical_site() {
            Some(s) => (s, s),
            None => (0, d - 1),
        };
        let cores = self.cores_mut();
        for k in lo..site {
            left_orthogonalize_core(cores, k);
        }
        for k in ((site + 1)..=hi).rev() {
            right_orthogonalize_core(cores, k);
        }
        self.set_canonical_site(Some(site));
        Ok(())
    }

    /// Moves the canonical site by one with a single QR.
    fn canonical_shift(&mut self, dir: Direction) -> Result<()> {
        let d = self.num_cores();
        let s = self
            .canonical_site()
            .ok_or_else(|| Error::invalid("canonical shift requires a canonical site"))?;
        match dir {
            Direction::Right if s + 1 < d => {
                left_orthogonalize_core(self.cores_mut(), s);
                self.set_canonical_site(Some(s + 1));
            }
            Direction::Left if s > 0 => {
                right_orthogonalize_core(self.cores_mut(), s);
                self.set_canonical_site(Some(s - 1));
            }
            _ => {
                return Err(Error::invalid(format!(
                    "cannot shift canonical site {s} {dir:?} with {d} cores"
                )))
            }
        }
        Ok(())
    }

    /// Frobenius norm squared, read off the center core after canonicalizing
    /// a copy (nonnegative by construction).
    fn norm_squared(&self) -> f64
    where
        Self: Clone,
    {
        let mut copy = self.clone();
        let site = copy.canonical_site().unwrap_or(0);
        copy.orthogonalize_site(site)
            .expect("site taken from the train itself");
        copy.cores()[site].norm_squared()
    }

    /// Rank-only reduction without truncation: a left-to-right then a
    /// right-to-left QR pass. Ranks end up within the feasibility bound.
    fn compress(&mut self) {
        let d = self.num_cores();
        self.set_canonical_site(None);
        let cores = self.cores_mut();
        for k in 0..d.saturating_sub(1) {
            left_orthogonalize_core(cores, k);
        }
        for k in (1..d).rev() {
            right_orthogonalize_core(cores, k);
        }
        self.set_canonical_site(Some(0));
    }

    /// TT-rounding: SVD truncation to `max_ranks` (length D+1) with relative
    /// Frobenius tolerance `rel_tol`. Leaves the train canonical at the last site.
    fn round(&mut self, max_ranks: &[usize], rel_tol: f64) -> Result<()> {
        let d = self.num_cores();
        if max_ranks.len() != d + 1 {
            return Err(Error::invalid(format!(
                "rank vector of length {} for {d} cores",
                max_ranks.len()
            )));
        }
        self.orthogonalize_site(0)?;
        let norm = self.cores()[0].norm_squared().sqrt();
        let delta = if d > 1 {
            rel_tol * norm / ((d - 1) as f64).sqrt()
        } else {
            0.0
        };
        let cores = self.cores_mut();
        for k in 0..d.saturating_sub(1) {
            let (l, n, _) = cores[k].shape();
            let svd = svd_sorted(cores[k].left_unfolding().into_owned());
            let keep = truncation_rank(svd.s.as_slice(), max_ranks[k + 1].max(1), delta * delta);
            let u = svd.u.columns(0, keep).into_owned();
            let sv = DMatrix::from_diagonal(&svd.s.rows(0, keep)) * svd.v_t.rows(0, keep);
            cores[k] = Core3::from_left_unfolding(u, l, n);
            let (_, n1, r1) = cores[k + 1].shape();
            let merged = sv * cores[k + 1].right_unfolding();
            cores[k + 1] = Core3::from_right_unfolding(merged, n1, r1);
        }
        self.set_canonical_site(Some(d - 1));
        Ok(())
    }
}
