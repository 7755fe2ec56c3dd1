//! Square-root Kalman measurement update with the mean kept as a train and
//! the covariance square root kept as a train matrix.
//!
//! Per measurement: `v = L^T phi`, `S = ||v||^2 + sigma^2`, `K = L v / S`.
//! The mean is swept toward `w + (y - phi^T w) K`; the square root is swept
//! toward `[L - K v^T | sigma K e_1^T]`, which doubles the column multiplier
//! of the augmented core. Once the multiplier reaches `2^p` the augmented
//! core is compressed back to half its columns by a thin SVD.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GaussianPrediction, OnlineFilter};
use crate::error::{Error, Result};
use crate::features::PriorSpec;
use crate::linalg::svd_sorted;
use crate::tensor::{
    run_sweeps, Canonical, Core3, Cores, Direction, KronOperand, ProjectionFrame,
    Rank1FeatureTT, SweepOperand, SweepOrder, TensorTrain, TensorTrainMatrix,
};

/// Largest QR budget the auto rule will pick.
const MAX_AUTO_BUDGET: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepConfig {
    pub max_sweeps: usize,
    /// Relative change of the residual below which sweeping stops early.
    pub residual_tol: f64,
    pub order: SweepOrder,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 1,
            residual_tol: 1e-8,
            order: SweepOrder::LeftToRight,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TnsrkfConfig {
    /// Mean ranks `R_0 .. R_D`, clipped to feasibility.
    pub mean_ranks: Vec<usize>,
    /// Square-root ranks `R_0 .. R_D`, clipped to feasibility.
    pub sqrt_ranks: Vec<usize>,
    /// QR-skip budget `p`; `None` picks the smallest exact value.
    pub qr_budget: Option<u32>,
    pub noise_var: f64,
    /// Augmented core, 0-based; `None` means `ceil(D/2) - 1`.
    pub aug_site: Option<usize>,
    pub sweep: SweepConfig,
    pub seed: u64,
}

impl TnsrkfConfig {
    /// Uniform interior ranks `r_w` and `r_l` for `d` cores.
    pub fn uniform(d: usize, r_w: usize, r_l: usize, noise_var: f64, seed: u64) -> Self {
        Self {
            mean_ranks: crate::tensor::uniform_ranks(d, r_w),
            sqrt_ranks: crate::tensor::uniform_ranks(d, r_l),
            qr_budget: None,
            noise_var,
            aug_site: None,
            sweep: SweepConfig::default(),
            seed,
        }
    }
}

/// Smallest `p >= 1` with `2^(p-1) J >= R_left I R_right`, i.e. the kept
/// columns always cover the row count of the reshaped augmented core.
pub fn auto_qr_budget(left: usize, rows: usize, right: usize, cols: usize) -> u32 {
    let need = left * rows * right;
    let mut p = 1;
    while p < MAX_AUTO_BUDGET && (cols << (p - 1)) < need {
        p += 1;
    }
    p
}

/// Outcome of one SVD compression of the augmented core.
#[derive(Clone, Debug, PartialEq)]
pub struct QrReport {
    /// All singular values of the reshaped core, descending.
    pub singular_values: Vec<f64>,
    pub kept_columns: usize,
    /// Sum of squared singular values that were dropped.
    pub discarded_energy: f64,
}

impl QrReport {
    pub fn truncated(&self) -> bool {
        self.discarded_energy > 0.0
    }
}

/// Core-update notification passed to observers during a step.
#[derive(Debug)]
pub enum StepObservation<'a> {
    Mean { site: usize, iterate: &'a TensorTrain },
    Cov { site: usize, iterate: &'a TensorTrainMatrix },
}

/// The three operands whose weighted sum `term1 - term2 + sigma term3` is
/// the square-root target, all in the layout of the updated factor
/// (multiplier doubled). Terms 2 and 3 are kept as row/column train pairs.
#[derive(Clone, Debug)]
pub struct CovarianceUpdate {
    /// `S = ||L^T phi||^2 + sigma^2`.
    pub innovation: f64,
    /// `v = L^T phi` over the previous factor's column modes.
    pub projected: TensorTrain,
    /// `K = L v / S`.
    pub gain: TensorTrain,
    /// `[L | 0]`.
    pub term1: TensorTrainMatrix,
    /// `[v^T | 0]` as a train over the new column modes.
    padded_projected: TensorTrain,
    /// Unit vector selecting the first column of the appended block.
    selector: TensorTrain,
    pub sigma: f64,
}

impl CovarianceUpdate {
    pub fn new(l_prev: &TensorTrainMatrix, phi: &Rank1FeatureTT, noise_var: f64) -> Result<Self> {
        let (innovation, projected) = innovation(l_prev, phi, noise_var)?;
        let gain = kalman_gain(l_prev, &projected, innovation)?;
        let m = l_prev.aug_multiplier();
        let new_mult = 2 * m;
        let term1 = l_prev.pad_aug_columns(new_mult)?;
        let aug = l_prev.aug_site();
        let cols = l_prev.col_sizes();

        let mut padded = projected.clone();
        let core = projected.core(aug);
        let (pl, pn, pr) = core.shape();
        let mut wide = Core3::zeros(pl, cols[aug] * new_mult, pr);
        for b in 0..pr {
            for c in 0..pn {
                for a in 0..pl {
                    wide.set(a, c, b, core.get(a, c, b));
                }
            }
        }
        let mut cores = padded.cores().to_vec();
        cores[aug] = wide;
        padded = TensorTrain::new(cores)?;

        let selector = TensorTrain::new(
            (0..cols.len())
                .map(|d| {
                    let (n, sel) = if d == aug {
                        (cols[d] * new_mult, cols[d] * m)
                    } else {
                        (cols[d], 0)
                    };
                    let mut e = Core3::zeros(1, n, 1);
                    e.set(0, sel, 0, 1.0);
                    e
                })
                .collect(),
        )?;
        Ok(Self {
            innovation,
            projected,
            gain,
            term1,
            padded_projected: padded,
            selector,
            sigma: noise_var.sqrt(),
        })
    }

    /// `[K v^T | 0]`.
    pub fn term2(&self) -> KronOperand<'_> {
        KronOperand {
            rows: self.gain.cores(),
            cols: self.padded_projected.cores(),
        }
    }

    /// `[0 | K e_1^T]`.
    pub fn term3(&self) -> KronOperand<'_> {
        KronOperand {
            rows: self.gain.cores(),
            cols: self.selector.cores(),
        }
    }

    /// `frame^T term_k` for each term, unweighted.
    pub fn project_terms(&self, frame: &ProjectionFrame<'_>) -> [Core3; 3] {
        [
            frame.project(&Cores(self.term1.cores())),
            frame.project(&self.term2()),
            frame.project(&self.term3()),
        ]
    }

    /// Explicit train matrix of a row/column pair in the layout of `term1`.
    pub fn materialize(&self, op: &KronOperand<'_>) -> Result<TensorTrainMatrix> {
        let cores = op
            .rows
            .iter()
            .zip(op.cols)
            .map(|(a, b)| {
                let (al, ni, ar) = a.shape();
                let (bl, nc, br) = b.shape();
                Core3::from_fn(al * bl, ni * nc, ar * br, |x, m, y| {
                    a.get(x % al, m % ni, y % ar) * b.get(x / al, m / ni, y / ar)
                })
            })
            .collect();
        TensorTrainMatrix::new(
            cores,
            self.term1.row_sizes().to_vec(),
            self.term1.col_sizes().to_vec(),
            self.term1.aug_site(),
            self.term1.aug_multiplier(),
        )
    }

    /// Dense target `[(I - K phi^T) L | sigma K e_1^T]`.
    pub fn target_dense(&self) -> Result<DMatrix<f64>> {
        let t2 = self.materialize(&self.term2())?.to_dense()?;
        let t3 = self.materialize(&self.term3())?.to_dense()?;
        Ok(self.term1.to_dense()? - t2 + t3 * self.sigma)
    }
}

/// `S = ||L^T phi||^2 + sigma^2` together with `v = L^T phi` (compressed).
pub fn innovation(
    l: &TensorTrainMatrix,
    phi: &Rank1FeatureTT,
    noise_var: f64,
) -> Result<(f64, TensorTrain)> {
    let mut v = l.transpose_apply(phi)?;
    v.compress();
    let s = v.core(0).norm_squared() + noise_var;
    if !s.is_finite() || s < noise_var * (1.0 - 1e-12) || s <= 0.0 {
        return Err(Error::numerical(format!(
            "innovation {s} below the noise variance {noise_var}"
        )));
    }
    Ok((s, v))
}

/// `K = L v / S` (compressed).
pub fn kalman_gain(l: &TensorTrainMatrix, v: &TensorTrain, s: f64) -> Result<TensorTrain> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::numerical(format!("innovation {s} is not positive")));
    }
    let mut k = l.apply(v)?;
    k.compress();
    k.scale(1.0 / s);
    Ok(k)
}

/// Replaces the augmented core of `l` (multiplier `m`, even) by the first
/// `m J / 2` columns of `U S` from its thin SVD, halving the multiplier.
/// `L L^T` is unchanged whenever the discarded singular values are zero.
pub fn qr_step(l: &mut TensorTrainMatrix) -> Result<QrReport> {
    let m = l.aug_multiplier();
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::invalid(format!("multiplier {m} cannot be halved")));
    }
    let site = l.aug_site();
    l.orthogonalize_site(site)?;
    let core = l.core(site);
    let (r, n, rr) = core.shape();
    let ni = l.row_sizes()[site];
    let nc = n / ni;
    let rows = r * ni * rr;
    let mat = DMatrix::from_fn(rows, nc, |row, c| {
        let a = row % r;
        let i = (row / r) % ni;
        let b = row / (r * ni);
        core.get(a, i + ni * c, b)
    });
    let svd = svd_sorted(mat);
    let keep = nc / 2;
    let avail = keep.min(svd.s.len());
    let mut out = Core3::zeros(r, ni * keep, rr);
    for c in 0..avail {
        let s = svd.s[c];
        for row in 0..rows {
            let a = row % r;
            let i = (row / r) % ni;
            let b = row / (r * ni);
            out.set(a, i + ni * c, b, svd.u[(row, c)] * s);
        }
    }
    let discarded_energy = svd.s.iter().skip(avail).map(|s| s * s).sum();
    l.replace_aug_core(out, m / 2);
    Ok(QrReport {
        singular_values: svd.s.iter().copied().collect(),
        kept_columns: keep,
        discarded_energy,
    })
}

/// Moves the augmented column index to the neighbouring core by a thin SVD
/// split, leaving the dense matrix unchanged. The new bond dimension is the
/// full split rank.
pub fn move_aug_index(l: &mut TensorTrainMatrix, dir: Direction) -> Result<()> {
    let d = l.num_cores();
    let site = l.aug_site();
    let target = match dir {
        Direction::Right if site + 1 < d => site + 1,
        Direction::Left if site > 0 => site - 1,
        _ => {
            return Err(Error::invalid(format!(
                "cannot move the augmented index {dir:?} from site {site}"
            )))
        }
    };
    l.orthogonalize_site(site)?;
    let m = l.aug_multiplier();
    let (ni, nj) = (l.row_sizes()[site], l.col_sizes()[site]);
    let (ti, tj) = (l.row_sizes()[target], l.col_sizes()[target]);
    let core = l.core(site).clone();
    let nb = l.core(target).clone();
    let (r, _, rr) = core.shape();
    let base = ni * nj;
    match dir {
        Direction::Right => {
            // rows (a, i, j), cols (q, b)
            let mat = DMatrix::from_fn(r * base, m * rr, |row, col| {
                let (a, ij) = (row % r, row / r);
                let (q, b) = (col % m, col / m);
                let (i, j) = (ij % ni, ij / ni);
                core.get(a, i + ni * (j + nj * q), b)
            });
            let svd = svd_sorted(mat);
            let k = svd.s.len();
            let new_core = Core3::from_left_unfolding(svd.u.clone(), r, base);
            let sv = DMatrix::from_diagonal(&svd.s) * &svd.v_t;
            let (_, _, r2) = nb.shape();
            let mut new_nb = Core3::zeros(k, ti * tj * m, r2);
            for y in 0..r2 {
                for q in 0..m {
                    for jj in 0..tj {
                        for ii in 0..ti {
                            for c in 0..k {
                                let mut acc = 0.0;
                                for b in 0..rr {
                                    acc += sv[(c, q + m * b)] * nb.get(b, ii + ti * jj, y);
                                }
                                new_nb.set(c, ii + ti * (jj + tj * q), y, acc);
                            }
                        }
                    }
                }
            }
            l.replace_pair(site, new_core, new_nb, target);
        }
        Direction::Left => {
            // rows (q, a), cols (i, j, b)
            let mat = DMatrix::from_fn(m * r, base * rr, |row, col| {
                let (q, a) = (row % m, row / m);
                let (ij, b) = (col % base, col / base);
                let (i, j) = (ij % ni, ij / ni);
                core.get(a, i + ni * (j + nj * q), b)
            });
            let svd = svd_sorted(mat);
            let k = svd.s.len();
            let new_core = Core3::from_right_unfolding(svd.v_t.clone(), base, rr);
            let us = &svd.u * DMatrix::from_diagonal(&svd.s);
            let (x0, _, _) = nb.shape();
            let mut new_nb = Core3::zeros(x0, ti * tj * m, k);
            for c in 0..k {
                for q in 0..m {
                    for jj in 0..tj {
                        for ii in 0..ti {
                            for x in 0..x0 {
                                let mut acc = 0.0;
                                for a in 0..r {
                                    acc += nb.get(x, ii + ti * jj, a) * us[(q + m * a, c)];
                                }
                                new_nb.set(x, ii + ti * (jj + tj * q), c, acc);
                            }
                        }
                    }
                }
            }
            l.replace_pair(target, new_nb, new_core, target);
        }
    }
    l.set_canonical_site(Some(target));
    Ok(())
}

/// Filter state: mean train, square-root train matrix and bookkeeping.
#[derive(Clone, Debug)]
pub struct Tnsrkf {
    mean: TensorTrain,
    sqrt_factor: TensorTrainMatrix,
    /// Random starting iterate for the first square-root sweep.
    initial_guess: Option<TensorTrainMatrix>,
    noise_var: f64,
    qr_budget: u32,
    sweep: SweepConfig,
    steps: usize,
    last_qr: Option<QrReport>,
}

impl Tnsrkf {
    pub fn new(prior: &PriorSpec, cfg: &TnsrkfConfig) -> Result<Self> {
        prior.validate()?;
        let modes = prior.mode_sizes();
        let cols = prior.col_sizes();
        let d = modes.len();
        if !(cfg.noise_var > 0.0 && cfg.noise_var.is_finite()) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        if cfg.mean_ranks.len() != d + 1 || cfg.sqrt_ranks.len() != d + 1 {
            return Err(Error::invalid(format!("rank vectors must have length {}", d + 1)));
        }
        if cfg.qr_budget == Some(0) {
            return Err(Error::invalid("QR budget must be at least 1"));
        }
        let aug = cfg.aug_site.unwrap_or(d.div_ceil(2) - 1);
        if aug >= d {
            return Err(Error::invalid(format!("augmented site {aug} out of range")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

        let start = if cfg.sweep.order == SweepOrder::RightToLeft { d - 1 } else { 0 };
        let mut mean = TensorTrain::random(&modes, &cfg.mean_ranks, &mut rng)?;
        mean.orthogonalize_site(start)?;
        let (l, n, r) = mean.core(start).shape();
        mean.set_core(start, Core3::zeros(l, n, r))?;

        let mut sqrt_factor = prior.sqrt_ttm()?;
        sqrt_factor.set_aug_site(aug)?;

        let r_max = cfg.sqrt_ranks.iter().copied().max().unwrap_or(1).max(1);
        let std_dev = 1.0 / ((r_max * modes[aug] * cols[aug]) as f64).sqrt();
        let mut guess = TensorTrainMatrix::random(&modes, &cols, &cfg.sqrt_ranks, aug, 2, std_dev, &mut rng)?;
        guess.orthogonalize_site(aug)?;

        let ranks = guess.ranks();
        let qr_budget = cfg
            .qr_budget
            .unwrap_or_else(|| auto_qr_budget(ranks[aug], modes[aug], ranks[aug + 1], cols[aug]));
        log::debug!("filter init: aug site {aug}, QR budget {qr_budget}, sqrt ranks {ranks:?}");
        Ok(Self {
            mean,
            sqrt_factor,
            initial_guess: Some(guess),
            noise_var: cfg.noise_var,
            qr_budget,
            sweep: cfg.sweep,
            steps: 0,
            last_qr: None,
        })
    }

    pub fn mean(&self) -> &TensorTrain {
        &self.mean
    }

    pub fn sqrt_factor(&self) -> &TensorTrainMatrix {
        &self.sqrt_factor
    }

    pub fn initial_guess(&self) -> Option<&TensorTrainMatrix> {
        self.initial_guess.as_ref()
    }

    pub fn qr_budget(&self) -> u32 {
        self.qr_budget
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn last_qr(&self) -> Option<&QrReport> {
        self.last_qr.as_ref()
    }

    /// `S = ||L^T phi||^2 + sigma^2`.
    pub fn innovation(&self, phi: &Rank1FeatureTT) -> Result<f64> {
        innovation(&self.sqrt_factor, phi, self.noise_var).map(|(s, _)| s)
    }

    /// `K = L L^T phi / S`.
    pub fn kalman_gain(&self, phi: &Rank1FeatureTT, s: f64) -> Result<TensorTrain> {
        let mut v = self.sqrt_factor.transpose_apply(phi)?;
        v.compress();
        kalman_gain(&self.sqrt_factor, &v, s)
    }

    /// Sweeps a copy of the mean toward `w + (y - phi^T w) K`.
    pub fn mean_sweep(
        &self,
        phi: &Rank1FeatureTT,
        y: f64,
        gain: &TensorTrain,
        observer: &mut dyn FnMut(StepObservation<'_>),
    ) -> Result<TensorTrain> {
        let resid = y - phi.dot_tt(&self.mean)?;
        if !resid.is_finite() {
            return Err(Error::numerical("non-finite residual"));
        }
        let mut iterate = self.mean.clone();
        let (w, k) = (Cores(self.mean.cores()), Cores(gain.cores()));
        let operands: [(f64, &dyn SweepOperand); 2] = [(1.0, &w), (resid, &k)];
        run_sweeps(
            &mut iterate,
            &operands,
            self.sweep.order,
            self.sweep.max_sweeps,
            self.sweep.residual_tol,
            &mut |site, it: &TensorTrain| observer(StepObservation::Mean { site, iterate: it }),
        )?;
        Ok(iterate)
    }

    /// Sweeps the square-root iterate toward the three-term target. The
    /// result carries the doubled multiplier.
    pub fn cov_sweep(
        &self,
        update: &CovarianceUpdate,
        observer: &mut dyn FnMut(StepObservation<'_>),
    ) -> Result<TensorTrainMatrix> {
        let mut iterate = match &self.initial_guess {
            Some(g) if g.aug_multiplier() == update.term1.aug_multiplier() => g.clone(),
            _ => update.term1.clone(),
        };
        let t1 = Cores(update.term1.cores());
        let t2 = update.term2();
        let t3 = update.term3();
        let operands: [(f64, &dyn SweepOperand); 3] =
            [(1.0, &t1), (-1.0, &t2), (update.sigma, &t3)];
        run_sweeps(
            &mut iterate,
            &operands,
            self.sweep.order,
            self.sweep.max_sweeps,
            self.sweep.residual_tol,
            &mut |site, it: &TensorTrainMatrix| observer(StepObservation::Cov { site, iterate: it }),
        )?;
        Ok(iterate)
    }

    /// One measurement update; the state is only replaced on success.
    pub fn step_observed(
        &mut self,
        phi: &Rank1FeatureTT,
        y: f64,
        observer: &mut dyn FnMut(StepObservation<'_>),
    ) -> Result<Option<QrReport>> {
        if !y.is_finite() {
            return Err(Error::numerical("non-finite measurement"));
        }
        let update = CovarianceUpdate::new(&self.sqrt_factor, phi, self.noise_var)?;
        let mean = self.mean_sweep(phi, y, &update.gain, observer)?;
        let mut sqrt_factor = self.cov_sweep(&update, observer)?;
        let report = if sqrt_factor.aug_multiplier() >= 1usize << self.qr_budget {
            Some(qr_step(&mut sqrt_factor)?)
        } else {
            None
        };
        if !mean.is_finite() || !sqrt_factor.is_finite() {
            return Err(Error::numerical("non-finite state after update"));
        }
        self.mean = mean;
        self.sqrt_factor = sqrt_factor;
        self.initial_guess = None;
        self.steps += 1;
        self.last_qr.clone_from(&report);
        Ok(report)
    }

    pub fn step(&mut self, phi: &Rank1FeatureTT, y: f64) -> Result<Option<QrReport>> {
        self.step_observed(phi, y, &mut |_| {})
    }

    /// Moves the augmented index of the square-root factor by one core.
    pub fn move_aug_index(&mut self, dir: Direction) -> Result<()> {
        let mut l = self.sqrt_factor.clone();
        move_aug_index(&mut l, dir)?;
        self.sqrt_factor = l;
        Ok(())
    }

    pub fn predict_at(&self, phi: &Rank1FeatureTT) -> Result<GaussianPrediction> {
        let mean = phi.dot_tt(&self.mean)?;
        let mut v = self.sqrt_factor.transpose_apply(phi)?;
        v.compress();
        Ok(GaussianPrediction {
            mean,
            variance: v.core(0).norm_squared(),
        })
    }
}

impl OnlineFilter for Tnsrkf {
    fn name(&self) -> &'static str {
        "tnsrkf"
    }

    fn update(&mut self, phi: &Rank1FeatureTT, y: f64) -> Result<()> {
        self.step(phi, y).map(|_| ())
    }

    fn predict(&self, phi: &Rank1FeatureTT) -> Result<GaussianPrediction> {
        self.predict_at(phi)
    }

    fn noise_var(&self) -> f64 {
        self.noise_var
    }

    fn dense_mean(&self) -> Result<DVector<f64>> {
        self.mean.to_dense()
    }

    fn dense_covariance(&self) -> Result<DMatrix<f64>> {
        let l = self.sqrt_factor.to_dense()?;
        Ok(&l * l.transpose())
    }
}
