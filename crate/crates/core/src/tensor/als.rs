//! One-core-at-a-time projection sweeps.
//!
//! The iterate `x` is driven toward `b = sum_k coef_k * operand_k`. At each
//! site the free core is replaced by `frame^T b`, which is the exact
//! minimizer of `||x - b||` over that core, so the residual never grows
//! within a sweep and `||x - b||^2 = ||b||^2 - ||x||^2` after every update.

use nalgebra::DMatrix;

use super::canonical::{Canonical, Direction};
use super::operand::SweepOperand;
use super::Core3;
use crate::error::{Error, Result};

/// Order of core visits across repeated sweeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SweepOrder {
    #[default]
    LeftToRight,
    RightToLeft,
    Alternating,
}

impl SweepOrder {
    fn direction(self, sweep_index: usize) -> Direction {
        match self {
            SweepOrder::LeftToRight => Direction::Right,
            SweepOrder::RightToLeft => Direction::Left,
            SweepOrder::Alternating if sweep_index.is_multiple_of(2) => Direction::Right,
            SweepOrder::Alternating => Direction::Left,
        }
    }
}

/// Weighted operand list: each entry is `(coefficient, operand)`.
pub type Operands<'a> = [(f64, &'a dyn SweepOperand)];

/// One sweep over all cores in `direction` (`Right` visits 0..D). The
/// observer sees the iterate after every core update, before the shift.
pub fn sweep<T: Canonical>(
    iterate: &mut T,
    operands: &Operands<'_>,
    direction: Direction,
    observer: &mut dyn FnMut(usize, &T),
) -> Result<()> {
    let d = iterate.num_cores();
    for (_, op) in operands {
        if op.num_cores() != d || (0..d).any(|k| op.mode(k) != iterate.cores()[k].mode()) {
            return Err(Error::invalid("operand modes do not match the iterate"));
        }
    }
    let start = if direction == Direction::Right { 0 } else { d - 1 };
    iterate.orthogonalize_site(start)?;

    let one = DMatrix::from_element(1, 1, 1.0);
    // fixed-side environments, computed once from the untouched cores
    let mut fixed: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(operands.len());
    for (_, op) in operands {
        let mut envs = vec![DMatrix::zeros(0, 0); d + 1];
        match direction {
            Direction::Right => {
                envs[d] = one.clone();
                for k in (1..d).rev() {
                    envs[k] = op.right_step(&envs[k + 1], &iterate.cores()[k], k);
                }
            }
            Direction::Left => {
                envs[0] = one.clone();
                for k in 0..d - 1 {
                    envs[k + 1] = op.left_step(&envs[k], &iterate.cores()[k], k);
                }
            }
        }
        fixed.push(envs);
    }
    let mut moving: Vec<DMatrix<f64>> = vec![one; operands.len()];

    let sites: Vec<usize> = match direction {
        Direction::Right => (0..d).collect(),
        Direction::Left => (0..d).rev().collect(),
    };
    for &k in &sites {
        let shape = iterate.cores()[k].shape();
        let mut core = Core3::zeros(shape.0, shape.1, shape.2);
        for (j, (coef, op)) in operands.iter().enumerate() {
            if *coef == 0.0 {
                continue;
            }
            let part = match direction {
                Direction::Right => op.project(&moving[j], &fixed[j][k + 1], k),
                Direction::Left => op.project(&fixed[j][k], &moving[j], k),
            };
            core.add_scaled(&part, *coef);
        }
        if !core.is_finite() {
            return Err(Error::numerical(format!("non-finite core at site {k}")));
        }
        iterate.cores_mut()[k] = core;
        observer(k, iterate);
        let last = match direction {
            Direction::Right => k + 1 == d,
            Direction::Left => k == 0,
        };
        if last {
            break;
        }
        iterate.canonical_shift(direction)?;
        for (j, (_, op)) in operands.iter().enumerate() {
            moving[j] = match direction {
                Direction::Right => op.left_step(&moving[j], &iterate.cores()[k], k),
                Direction::Left => op.right_step(&moving[j], &iterate.cores()[k], k),
            };
        }
    }
    Ok(())
}

/// Repeated sweeps until `max_sweeps` or until the relative change of
/// `||x||^2` (equivalently of the residual) drops below `residual_tol`.
/// Returns the number of sweeps performed.
pub fn run_sweeps<T: Canonical>(
    iterate: &mut T,
    operands: &Operands<'_>,
    order: SweepOrder,
    max_sweeps: usize,
    residual_tol: f64,
    observer: &mut dyn FnMut(usize, &T),
) -> Result<usize> {
    let mut previous: Option<f64> = None;
    for s in 0..max_sweeps.max(1) {
        sweep(iterate, operands, order.direction(s), observer)?;
        let site = iterate
            .canonical_site()
            .expect("a sweep leaves the iterate canonical");
        let energy = iterate.cores()[site].norm_squared();
        if let Some(prev) = previous {
            if (energy - prev).abs() <= residual_tol * energy.max(f64::MIN_POSITIVE) {
                return Ok(s + 1);
            }
        }
        previous = Some(energy);
    }
    Ok(max_sweeps.max(1))
}
