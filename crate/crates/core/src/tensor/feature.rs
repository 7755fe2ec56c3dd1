use nalgebra::DVector;

use super::{checked_size, Core3, TensorTrain};
use crate::error::{Error, Result};

/// A Kronecker product of per-dimension vectors, i.e. a rank-1 train.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1FeatureTT {
    factors: Vec<DVector<f64>>,
}

impl Rank1FeatureTT {
    pub fn new(factors: Vec<DVector<f64>>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.is_empty()) {
            return Err(Error::invalid("feature factors must be nonempty"));
        }
        Ok(Self { factors })
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, d: usize) -> &DVector<f64> {
        &self.factors[d]
    }

    pub fn factors(&self) -> &[DVector<f64>] {
        &self.factors
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.factors.iter().map(DVector::len).collect()
    }

    pub fn to_tt(&self) -> TensorTrain {
        let cores = self
            .factors
            .iter()
            .map(|f| Core3::from_data(1, f.len(), 1, f.as_slice().to_vec()))
            .collect();
        TensorTrain::new(cores).expect("unit ranks always chain")
    }

    /// Kronecker product of the factors, factor 0 outermost.
    pub fn to_dense(&self) -> Result<DVector<f64>> {
        checked_size(&self.mode_sizes(), super::dense_cap())?;
        let mut out = DVector::from_element(1, 1.0);
        for f in &self.factors {
            out = out.kronecker(f);
        }
        Ok(out)
    }

    /// `phi^T w` by a single left-to-right pass over `w`.
    pub fn dot_tt(&self, w: &TensorTrain) -> Result<f64> {
        if w.mode_sizes() != self.mode_sizes() {
            return Err(Error::invalid("feature and train modes differ"));
        }
        let mut env = DVector::from_element(1, 1.0);
        for (k, f) in self.factors.iter().enumerate() {
            let core = w.core(k);
            let (l, n, r) = core.shape();
            let mut next = DVector::zeros(r);
            for b in 0..r {
                let mut acc = 0.0;
                for i in 0..n {
                    for a in 0..l {
                        acc += env[a] * f[i] * core.get(a, i, b);
                    }
                }
                next[b] = acc;
            }
            env = next;
        }
        Ok(env[0])
    }
}
