use nalgebra::DMatrix;

use super::operand::SweepOperand;
use super::tt::dense_chain;
use super::{checked_size, dense_cap, Core3};
use crate::error::Result;

/// All cores of a canonical train except the one at `site`, read as the
/// linear map from that core's entries to the full vector.
///
/// For a train in site-`site` canonical form the map has orthonormal
/// columns, so [`project`](Self::project) is an orthogonal projection.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionFrame<'a> {
    cores: &'a [Core3],
    site: usize,
}

impl<'a> ProjectionFrame<'a> {
    pub(crate) fn new(cores: &'a [Core3], site: usize) -> Self {
        Self { cores, site }
    }

    pub fn site(&self) -> usize {
        self.site
    }

    /// Shape of the core this frame acts on.
    pub fn core_shape(&self) -> (usize, usize, usize) {
        self.cores[self.site].shape()
    }

    /// `frame^T operand` for an operand with the same mode sizes; the
    /// result has the shape of the free core.
    pub fn project(&self, operand: &dyn SweepOperand) -> Core3 {
        let d = self.cores.len();
        let mut left = DMatrix::from_element(1, 1, 1.0);
        for k in 0..self.site {
            left = operand.left_step(&left, &self.cores[k], k);
        }
        let mut right = DMatrix::from_element(1, 1, 1.0);
        for k in (self.site + 1..d).rev() {
            right = operand.right_step(&right, &self.cores[k], k);
        }
        operand.project(&left, &right, self.site)
    }

    /// Dense frame matrix, one column per free-core entry in storage order.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let modes: Vec<usize> = self.cores.iter().map(Core3::mode).collect();
        let rows = checked_size(&modes, dense_cap())?;
        let (l, n, r) = self.core_shape();
        let width = l * n * r;
        checked_size(&[rows, width], dense_cap())?;
        let mut out = DMatrix::zeros(rows, width);
        let mut cores = self.cores.to_vec();
        for e in 0..width {
            let mut unit = Core3::zeros(l, n, r);
            unit.data_mut()[e] = 1.0;
            cores[self.site] = unit;
            let col = dense_chain(&cores, rows);
            out.column_mut(e).copy_from_slice(&col);
        }
        Ok(out)
    }
}
