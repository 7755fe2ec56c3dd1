use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::canonical::Canonical;
use super::feature::Rank1FeatureTT;
use super::frame::ProjectionFrame;
use super::tt::{block_sum, dense_chain, feasible_ranks, validate_chain};
use super::{checked_size, dense_cap, Core3, TensorTrain};
use crate::error::{Error, Result};

/// A matrix of size `prod(I_d) x (m * prod(J_d))` in train format.
///
/// Core `d` is stored as a three-way core of shape `(R_d, I_d * C_d, R_{d+1})`
/// with merged index `k = i + I_d * c`. `C_d = J_d` except at `aug_site`,
/// where `C = m * J` with `c = j + J * q` and `m = aug_multiplier`.
///
/// Dense rows put dimension 0 outermost. Dense columns put the multiplier
/// digit `q` outermost, then dimension 0 .. D-1, so block `q` of the dense
/// matrix holds columns `q * prod(J) .. (q + 1) * prod(J)` regardless of
/// where the augmented core sits.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrainMatrix {
    cores: Vec<Core3>,
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    aug_site: usize,
    aug_multiplier: usize,
    canonical_site: Option<usize>,
}

impl TensorTrainMatrix {
    pub fn new(
        cores: Vec<Core3>,
        row_sizes: Vec<usize>,
        col_sizes: Vec<usize>,
        aug_site: usize,
        aug_multiplier: usize,
    ) -> Result<Self> {
        let d = cores.len();
        validate_chain(&cores)?;
        if row_sizes.len() != d || col_sizes.len() != d {
            return Err(Error::invalid("row/column size lists must have one entry per core"));
        }
        if aug_site >= d || aug_multiplier == 0 {
            return Err(Error::invalid(format!(
                "augmented site {aug_site} / multiplier {aug_multiplier} invalid for {d} cores"
            )));
        }
        for k in 0..d {
            let c = col_sizes[k] * if k == aug_site { aug_multiplier } else { 1 };
            if cores[k].mode() != row_sizes[k] * c || row_sizes[k] == 0 || col_sizes[k] == 0 {
                return Err(Error::invalid(format!(
                    "core {k} mode {} does not match {} x {c}",
                    cores[k].mode(),
                    row_sizes[k]
                )));
            }
        }
        Ok(Self {
            cores,
            row_sizes,
            col_sizes,
            aug_site,
            aug_multiplier,
            canonical_site: None,
        })
    }

    /// Rank-1 matrix equal to `A_0 kron A_1 kron .. kron A_{D-1}`. Each core is
    /// the factor's column-major data, shape `(1, I*J, 1)`.
    pub fn from_kron_factors(factors: &[DMatrix<f64>]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("no Kronecker factors"));
        }
        let cores = factors
            .iter()
            .map(|f| Core3::from_data(1, f.len(), 1, f.as_slice().to_vec()))
            .collect();
        Self::new(
            cores,
            factors.iter().map(DMatrix::nrows).collect(),
            factors.iter().map(DMatrix::ncols).collect(),
            0,
            1,
        )
    }

    /// Random train matrix with i.i.d. `N(0, std_dev^2)` core entries; ranks
    /// are clipped to the feasible maxima for the merged mode sizes.
    #[allow(clippy::too_many_arguments)]
    pub fn random<R: Rng + ?Sized>(
        row_sizes: &[usize],
        col_sizes: &[usize],
        ranks: &[usize],
        aug_site: usize,
        aug_multiplier: usize,
        std_dev: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let d = row_sizes.len();
        if d == 0 || col_sizes.len() != d || aug_site >= d || aug_multiplier == 0 {
            return Err(Error::invalid("invalid train-matrix dimensions"));
        }
        let merged: Vec<usize> = (0..d)
            .map(|k| row_sizes[k] * col_sizes[k] * if k == aug_site { aug_multiplier } else { 1 })
            .collect();
        let r = feasible_ranks(&merged, ranks)?;
        let cores = (0..d)
            .map(|k| {
                let mut core = Core3::zeros(r[k], merged[k], r[k + 1]);
                for v in core.data_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = std_dev * z;
                }
                core
            })
            .collect();
        Self::new(cores, row_sizes.to_vec(), col_sizes.to_vec(), aug_site, aug_multiplier)
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    /// Base column sizes `J_d`, without the multiplier.
    pub fn col_sizes(&self) -> &[usize] {
        &self.col_sizes
    }

    /// Column sizes as seen by a vector multiplied from the right.
    pub fn effective_col_sizes(&self) -> Vec<usize> {
        (0..self.cores.len()).map(|k| self.cols_at(k)).collect()
    }

    pub fn aug_site(&self) -> usize {
        self.aug_site
    }

    pub fn aug_multiplier(&self) -> usize {
        self.aug_multiplier
    }

    pub fn core(&self, k: usize) -> &Core3 {
        &self.cores[k]
    }

    pub fn nrows_dense(&self) -> usize {
        self.row_sizes.iter().product()
    }

    pub fn ncols_dense(&self) -> usize {
        self.aug_multiplier * self.col_sizes.iter().product::<usize>()
    }

    fn cols_at(&self, k: usize) -> usize {
        self.col_sizes[k] * if k == self.aug_site { self.aug_multiplier } else { 1 }
    }

    /// Moves the augmented-site marker; only legal while the multiplier is 1.
    pub fn set_aug_site(&mut self, site: usize) -> Result<()> {
        if site >= self.cores.len() || self.aug_multiplier != 1 {
            return Err(Error::invalid(
                "augmented site can only be relabelled at multiplier 1",
            ));
        }
        self.aug_site = site;
        Ok(())
    }

    /// Installs a new augmented core with a different multiplier. The caller
    /// keeps the adjacent ranks.
    pub(crate) fn replace_aug_core(&mut self, core: Core3, multiplier: usize) {
        let k = self.aug_site;
        debug_assert_eq!(core.mode(), self.row_sizes[k] * self.col_sizes[k] * multiplier);
        debug_assert_eq!((core.left(), core.right()), (self.cores[k].left(), self.cores[k].right()));
        self.cores[k] = core;
        self.aug_multiplier = multiplier;
    }

    /// Relocates the augmented index after a split; both cores are replaced.
    pub(crate) fn replace_pair(&mut self, left_site: usize, left: Core3, right: Core3, new_aug: usize) {
        self.cores[left_site] = left;
        self.cores[left_site + 1] = right;
        self.aug_site = new_aug;
    }

    pub fn is_finite(&self) -> bool {
        self.cores.iter().all(Core3::is_finite)
    }

    /// Dense matrix under the default cap.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.to_dense_capped(dense_cap())
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<f64>> {
        let merged: Vec<usize> = self.cores.iter().map(Core3::mode).collect();
        let total = checked_size(&merged, cap)?;
        let flat = dense_chain(&self.cores, total);
        let (nr, nc) = (self.nrows_dense(), self.ncols_dense());
        let mut out = DMatrix::zeros(nr, nc);
        let d = self.cores.len();
        let mut digits = vec![0usize; d];
        for (pos, &v) in flat.iter().enumerate() {
            let mut rem = pos;
            for k in (0..d).rev() {
                digits[k] = rem % merged[k];
                rem /= merged[k];
            }
            let (row, col) = self.dense_index(&digits);
            out[(row, col)] = v;
        }
        Ok(out)
    }

    /// Dense (row, column) position of a tuple of merged core indices.
    fn dense_index(&self, merged_digits: &[usize]) -> (usize, usize) {
        let mut row = 0;
        let mut col = 0;
        let mut q = 0;
        for (k, &m) in merged_digits.iter().enumerate() {
            let i = m % self.row_sizes[k];
            let c = m / self.row_sizes[k];
            row = row * self.row_sizes[k] + i;
            let j = c % self.col_sizes[k];
            if k == self.aug_site {
                q = c / self.col_sizes[k];
            }
            col = col * self.col_sizes[k] + j;
        }
        let base: usize = self.col_sizes.iter().product();
        (row, q * base + col)
    }

    /// Reorders the dense form of a train over [`Self::effective_col_sizes`]
    /// into this matrix's dense column order.
    pub fn column_tt_to_dense(&self, v: &TensorTrain) -> Result<DVector<f64>> {
        let modes = self.effective_col_sizes();
        if v.mode_sizes() != modes {
            return Err(Error::invalid("column train does not match the matrix columns"));
        }
        let flat = v.to_dense()?;
        let d = modes.len();
        let base: usize = self.col_sizes.iter().product();
        let mut out = DVector::zeros(self.ncols_dense());
        let mut digits = vec![0usize; d];
        for (pos, &val) in flat.iter().enumerate() {
            let mut rem = pos;
            for k in (0..d).rev() {
                digits[k] = rem % modes[k];
                rem /= modes[k];
            }
            let mut col = 0;
            let mut q = 0;
            for (k, (&digit, &n)) in digits.iter().zip(&self.col_sizes).enumerate() {
                col = col * n + digit % n;
                if k == self.aug_site {
                    q = digit / n;
                }
            }
            out[q * base + col] = val;
        }
        Ok(out)
    }

    /// `L^T phi` as a train over the (effective) column modes. Ranks are
    /// those of `L`.
    pub fn transpose_apply(&self, phi: &Rank1FeatureTT) -> Result<TensorTrain> {
        if phi.mode_sizes() != self.row_sizes {
            return Err(Error::invalid(format!(
                "feature modes {:?} do not match matrix rows {:?}",
                phi.mode_sizes(),
                self.row_sizes
            )));
        }
        let cores = self
            .cores
            .iter()
            .enumerate()
            .map(|(k, core)| {
                let (l, _, r) = core.shape();
                let ni = self.row_sizes[k];
                let nc = self.cols_at(k);
                let f = phi.factor(k);
                let mut out = Core3::zeros(l, nc, r);
                for b in 0..r {
                    for c in 0..nc {
                        for i in 0..ni {
                            let w = f[i];
                            if w == 0.0 {
                                continue;
                            }
                            for a in 0..l {
                                let cur = out.get(a, c, b);
                                out.set(a, c, b, cur + w * core.get(a, i + ni * c, b));
                            }
                        }
                    }
                }
                out
            })
            .collect();
        TensorTrain::new(cores)
    }

    /// `L v` for a train `v` over the effective column modes. Ranks multiply.
    pub fn apply(&self, v: &TensorTrain) -> Result<TensorTrain> {
        if v.mode_sizes() != self.effective_col_sizes() {
            return Err(Error::invalid(format!(
                "vector modes {:?} do not match matrix columns {:?}",
                v.mode_sizes(),
                self.effective_col_sizes()
            )));
        }
        let cores = self
            .cores
            .iter()
            .enumerate()
            .map(|(k, lc)| {
                let vc = v.core(k);
                let (rl, _, rr) = lc.shape();
                let (vl, _, vr) = vc.shape();
                let ni = self.row_sizes[k];
                let nc = self.cols_at(k);
                let mut out = Core3::zeros(rl * vl, ni, rr * vr);
                for y in 0..vr {
                    for b in 0..rr {
                        for c in 0..nc {
                            for x in 0..vl {
                                let w = vc.get(x, c, y);
                                if w == 0.0 {
                                    continue;
                                }
                                for i in 0..ni {
                                    for a in 0..rl {
                                        let idx = (a + rl * x, b + rr * y);
                                        let cur = out.get(idx.0, i, idx.1);
                                        out.set(idx.0, i, idx.1, cur + w * lc.get(a, i + ni * c, b));
                                    }
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        TensorTrain::new(cores)
    }

    /// Rank-product outer product `a b^T` of two trains; `b` runs over the
    /// base column sizes, multiplier 1.
    pub fn outer(a: &TensorTrain, b: &TensorTrain, aug_site: usize) -> Result<Self> {
        let rows = a.mode_sizes();
        let cols = b.mode_sizes();
        if rows.len() != cols.len() {
            return Err(Error::invalid("outer product of trains with different lengths"));
        }
        let cores = (0..rows.len())
            .map(|k| {
                let (ac, bc) = (a.core(k), b.core(k));
                let (al, ni, ar) = ac.shape();
                let (bl, nj, br) = bc.shape();
                Core3::from_fn(al * bl, ni * nj, ar * br, |x, m, y| {
                    let (xa, xb) = (x % al, x / al);
                    let (ya, yb) = (y % ar, y / ar);
                    ac.get(xa, m % ni, ya) * bc.get(xb, m / ni, yb)
                })
            })
            .collect();
        Self::new(cores, rows, cols, aug_site, 1)
    }

    /// Exact sum of two matrices with identical layout; ranks add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.row_sizes != other.row_sizes
            || self.col_sizes != other.col_sizes
            || self.aug_site != other.aug_site
            || self.aug_multiplier != other.aug_multiplier
        {
            return Err(Error::invalid("layout mismatch in train-matrix sum"));
        }
        Ok(Self {
            cores: block_sum(&self.cores, &other.cores),
            row_sizes: self.row_sizes.clone(),
            col_sizes: self.col_sizes.clone(),
            aug_site: self.aug_site,
            aug_multiplier: self.aug_multiplier,
            canonical_site: None,
        })
    }

    pub fn scale(&mut self, factor: f64) {
        let k = self.canonical_site.unwrap_or(0);
        self.cores[k].scale(factor);
    }

    /// Appends zero column blocks so the multiplier becomes `new_multiplier`.
    /// The dense matrix gains zero columns on the right.
    pub fn pad_aug_columns(&self, new_multiplier: usize) -> Result<Self> {
        if new_multiplier < self.aug_multiplier {
            return Err(Error::invalid("padding cannot shrink the multiplier"));
        }
        let mut out = self.clone();
        let k = self.aug_site;
        let core = &self.cores[k];
        let (l, n, r) = core.shape();
        let n_new = self.row_sizes[k] * self.col_sizes[k] * new_multiplier;
        let mut padded = Core3::zeros(l, n_new, r);
        for b in 0..r {
            for m in 0..n {
                for a in 0..l {
                    padded.set(a, m, b, core.get(a, m, b));
                }
            }
        }
        out.cores[k] = padded;
        out.aug_multiplier = new_multiplier;
        Ok(out)
    }

    /// The orthonormal frame of all cores but the canonical one.
    pub fn frame(&self) -> Result<ProjectionFrame<'_>> {
        let site = self
            .canonical_site
            .ok_or_else(|| Error::invalid("frame requires a canonical site"))?;
        Ok(ProjectionFrame::new(&self.cores, site))
    }
}

impl Canonical for TensorTrainMatrix {
    fn cores(&self) -> &[Core3] {
        &self.cores
    }

    fn cores_mut(&mut self) -> &mut Vec<Core3> {
        &mut self.cores
    }

    fn canonical_site(&self) -> Option<usize> {
        self.canonical_site
    }

    fn set_canonical_site(&mut self, site: Option<usize>) {
        self.canonical_site = site;
    }
}
