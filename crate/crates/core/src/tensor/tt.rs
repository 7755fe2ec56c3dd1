use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::canonical::{truncation_rank, Canonical};
use super::contract;
use super::frame::ProjectionFrame;
use super::{checked_size, dense_cap, Core3};
use crate::error::{Error, Result};
use crate::linalg::svd_sorted;

/// A vector of length `prod(I_d)` in tensor-train format.
///
/// Dense index ordering puts dimension 0 outermost: entry
/// `(i_0, .., i_{D-1})` sits at `i_0 * I_1 * .. * I_{D-1} + .. + i_{D-1}`,
/// which is the ordering of the Kronecker product of per-dimension factors.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core3>,
    canonical_site: Option<usize>,
}

/// `[1, r, .., r, 1]` for `d` cores.
pub fn uniform_ranks(d: usize, r: usize) -> Vec<usize> {
    let mut ranks = vec![r; d + 1];
    ranks[0] = 1;
    ranks[d] = 1;
    ranks
}

/// Clips requested bond dimensions (length D+1) to what the mode sizes can
/// support: `R_{k+1} <= R_k * n_k` and `R_k <= n_k * R_{k+1}`, which also
/// implies `R_{k+1} <= min(prod_{j<=k} n_j, prod_{j>k} n_j)`.
pub fn feasible_ranks(modes: &[usize], requested: &[usize]) -> Result<Vec<usize>> {
    let d = modes.len();
    if d == 0 {
        return Err(Error::invalid("empty mode list"));
    }
    if requested.len() != d + 1 {
        return Err(Error::invalid(format!(
            "rank vector must have length {} (got {})",
            d + 1,
            requested.len()
        )));
    }
    if modes.contains(&0) {
        return Err(Error::invalid("mode sizes must be positive"));
    }
    let mut r: Vec<usize> = requested.iter().map(|&x| x.max(1)).collect();
    r[0] = 1;
    r[d] = 1;
    for k in 0..d {
        r[k + 1] = r[k + 1].min(r[k].saturating_mul(modes[k]));
    }
    for k in (0..d).rev() {
        r[k] = r[k].min(modes[k].saturating_mul(r[k + 1]));
    }
    if r.as_slice() != requested {
        log::debug!("requested ranks {requested:?} clipped to {r:?}");
    }
    Ok(r)
}

impl TensorTrain {
    /// Builds a train from cores, checking boundary and adjacent ranks.
    pub fn new(cores: Vec<Core3>) -> Result<Self> {
        validate_chain(&cores)?;
        Ok(Self {
            cores,
            canonical_site: None,
        })
    }

    pub(crate) fn from_parts(cores: Vec<Core3>, canonical_site: Option<usize>) -> Self {
        debug_assert!(validate_chain(&cores).is_ok());
        Self {
            cores,
            canonical_site,
        }
    }

    /// All-zero train with unit ranks.
    pub fn zeros(modes: &[usize]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("empty mode list"));
        }
        Self::new(modes.iter().map(|&n| Core3::zeros(1, n, 1)).collect())
    }

    /// Random train with i.i.d. standard-normal core entries. Requested
    /// ranks (length D+1) are clipped to the feasible maxima.
    pub fn random<R: Rng + ?Sized>(modes: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        Self::random_scaled(modes, ranks, 1.0, rng)
    }

    pub(crate) fn random_scaled<R: Rng + ?Sized>(
        modes: &[usize],
        ranks: &[usize],
        std_dev: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let r = feasible_ranks(modes, ranks)?;
        let cores = modes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let mut core = Core3::zeros(r[k], n, r[k + 1]);
                for v in core.data_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = std_dev * z;
                }
                core
            })
            .collect();
        Self::new(cores)
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(Core3::mode).collect()
    }

    pub fn core(&self, k: usize) -> &Core3 {
        &self.cores[k]
    }

    /// Replaces core `k`; the replacement must keep the adjacent ranks.
    pub fn set_core(&mut self, k: usize, core: Core3) -> Result<()> {
        let old = &self.cores[k];
        if old.shape() != core.shape() {
            return Err(Error::invalid(format!(
                "core {k} shape {:?} does not match {:?}",
                core.shape(),
                old.shape()
            )));
        }
        self.cores[k] = core;
        if self.canonical_site != Some(k) {
            self.canonical_site = None;
        }
        Ok(())
    }

    pub fn len_dense(&self) -> usize {
        self.cores
            .iter()
            .fold(1usize, |acc, c| acc.saturating_mul(c.mode()))
    }

    /// Dense reconstruction under the default cap.
    pub fn to_dense(&self) -> Result<DVector<f64>> {
        self.to_dense_capped(dense_cap())
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DVector<f64>> {
        let total = checked_size(&self.mode_sizes(), cap)?;
        Ok(DVector::from_vec(dense_chain(&self.cores, total)))
    }

    /// TT-SVD of a dense vector with the given mode sizes, truncating each
    /// bond to `max_ranks` (length D+1) and relative tolerance `rel_tol`.
    pub fn from_dense(
        values: &DVector<f64>,
        modes: &[usize],
        max_ranks: &[usize],
        rel_tol: f64,
    ) -> Result<Self> {
        let d = modes.len();
        let total = checked_size(modes, usize::MAX)?;
        if values.len() != total {
            return Err(Error::invalid(format!(
                "dense length {} does not match modes {modes:?}",
                values.len()
            )));
        }
        let caps = feasible_ranks(modes, max_ranks)?;
        let norm = values.norm();
        let delta = if d > 1 {
            rel_tol * norm / ((d - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut cores = Vec::with_capacity(d);
        // remainder[a, s] with s running over the trailing modes, outermost first
        let mut remainder = DMatrix::from_column_slice(1, total, values.as_slice());
        let mut rank = 1;
        for (k, &n) in modes.iter().enumerate() {
            let rest = remainder.ncols() / n;
            if k + 1 == d {
                let mut core = Core3::zeros(rank, n, 1);
                for a in 0..rank {
                    for i in 0..n {
                        core.set(a, i, 0, remainder[(a, i)]);
                    }
                }
                cores.push(core);
                break;
            }
            let mut unfolded = DMatrix::zeros(rank * n, rest);
            for a in 0..rank {
                for i in 0..n {
                    for s in 0..rest {
                        unfolded[(a + rank * i, s)] = remainder[(a, i * rest + s)];
                    }
                }
            }
            let svd = svd_sorted(unfolded);
            let keep = truncation_rank(svd.s.as_slice(), caps[k + 1], delta * delta);
            cores.push(Core3::from_left_unfolding(
                svd.u.columns(0, keep).into_owned(),
                rank,
                n,
            ));
            remainder = DMatrix::from_diagonal(&svd.s.rows(0, keep)) * svd.v_t.rows(0, keep);
            rank = keep;
        }
        Ok(Self {
            cores,
            canonical_site: Some(d - 1),
        })
    }

    /// Inner product with another train of identical mode sizes.
    pub fn dot(&self, other: &TensorTrain) -> Result<f64> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::invalid(format!(
                "mode mismatch {:?} vs {:?}",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(contract::inner(&self.cores, &other.cores))
    }

    /// Multiplies the represented vector by `factor` (touches one core).
    pub fn scale(&mut self, factor: f64) {
        let k = self.canonical_site.unwrap_or(0);
        self.cores[k].scale(factor);
    }

    /// Exact sum; ranks add.
    pub fn add(&self, other: &TensorTrain) -> Result<TensorTrain> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::invalid("mode mismatch in train sum"));
        }
        Ok(TensorTrain::from_parts(
            block_sum(&self.cores, &other.cores),
            None,
        ))
    }

    /// The orthonormal frame of all cores but the canonical one.
    pub fn frame(&self) -> Result<ProjectionFrame<'_>> {
        let site = self
            .canonical_site
            .ok_or_else(|| Error::invalid("frame requires a canonical site"))?;
        Ok(ProjectionFrame::new(&self.cores, site))
    }

    pub fn is_finite(&self) -> bool {
        self.cores.iter().all(Core3::is_finite)
    }
}

impl Canonical for TensorTrain {
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

pub(crate) fn validate_chain(cores: &[Core3]) -> Result<()> {
    if cores.is_empty() {
        return Err(Error::invalid("a train needs at least one core"));
    }
    if cores[0].left() != 1 || cores[cores.len() - 1].right() != 1 {
        return Err(Error::invalid("boundary ranks must be 1"));
    }
    for (k, pair) in cores.windows(2).enumerate() {
        if pair[0].right() != pair[1].left() {
            return Err(Error::invalid(format!(
                "rank mismatch between cores {k} and {}: {} vs {}",
                k + 1,
                pair[0].right(),
                pair[1].left()
            )));
        }
    }
    Ok(())
}

/// Sequential left-to-right contraction into a dense vector, dimension 0
/// outermost.
pub(crate) fn dense_chain(cores: &[Core3], total: usize) -> Vec<f64> {
    // acc[p, a] row-major over (prefix p, bond a)
    let mut acc = vec![1.0];
    let mut prefix = 1usize;
    for core in cores {
        let (l, n, r) = core.shape();
        let mut next = vec![0.0; prefix * n * r];
        for p in 0..prefix {
            for a in 0..l {
                let w = acc[p * l + a];
                if w == 0.0 {
                    continue;
                }
                for i in 0..n {
                    let row = (p * n + i) * r;
                    for b in 0..r {
                        next[row + b] += w * core.get(a, i, b);
                    }
                }
            }
        }
        acc = next;
        prefix *= n;
    }
    debug_assert_eq!(acc.len(), total);
    acc
}

/// Block-diagonal core stacking that represents the sum of two chains.
pub(crate) fn block_sum(a: &[Core3], b: &[Core3]) -> Vec<Core3> {
    let d = a.len();
    if d == 1 {
        let mut c = a[0].clone();
        c.add_scaled(&b[0], 1.0);
        return vec![c];
    }
    (0..d)
        .map(|k| {
            let (la, n, ra) = a[k].shape();
            let (lb, _, rb) = b[k].shape();
            let (l, r) = match k {
                0 => (1, ra + rb),
                _ if k == d - 1 => (la + lb, 1),
                _ => (la + lb, ra + rb),
            };
            let mut c = Core3::zeros(l, n, r);
            let (ao, bo) = match k {
                0 => ((0, 0), (0, ra)),
                _ if k == d - 1 => ((0, 0), (la, 0)),
                _ => ((0, 0), (la, ra)),
            };
            for i in 0..n {
                for x in 0..la {
                    for y in 0..ra {
                        c.set(ao.0 + x, i, ao.1 + y, a[k].get(x, i, y));
                    }
                }
                for x in 0..lb {
                    for y in 0..rb {
                        c.set(bo.0 + x, i, bo.1 + y, b[k].get(x, i, y));
                    }
                }
            }
            c
        })
        .collect()
}
