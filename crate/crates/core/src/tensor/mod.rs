//! Tensor-train vectors and matrices.
//!
//! Every dense reconstruction treats dimension 0 as the outermost Kronecker
//! factor. Train-matrix cores are stored as three-way cores whose middle
//! index merges row and column as `k = i + I * c`.

mod als;
mod canonical;
mod contract;
mod core3;
mod feature;
mod frame;
mod operand;
mod tt;
mod ttm;

use std::sync::OnceLock;

pub use als::{run_sweeps, sweep, Operands, SweepOrder};
pub use canonical::{Canonical, Direction};
pub use core3::Core3;
pub use feature::Rank1FeatureTT;
pub use frame::ProjectionFrame;
pub use operand::{Cores, KronOperand, SweepOperand};
pub use tt::{feasible_ranks, uniform_ranks, TensorTrain};
pub use ttm::TensorTrainMatrix;

use crate::error::{Error, Result};

/// Default ceiling on the number of entries any dense reconstruction may have.
pub const DEFAULT_DENSE_CAP: usize = 1 << 24;

/// Dense cap in effect: `TTSRKF_DENSE_CAP` if set and parseable, else the default.
pub fn dense_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("TTSRKF_DENSE_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_DENSE_CAP)
    })
}

/// Product of `sizes`, failing with a resource-limit error above `cap`.
pub(crate) fn checked_size(sizes: &[usize], cap: usize) -> Result<usize> {
    let mut total: usize = 1;
    for &n in sizes {
        total = total.checked_mul(n).ok_or(Error::ResourceLimit {
            requested: usize::MAX,
            cap,
        })?;
    }
    if total > cap {
        return Err(Error::ResourceLimit {
            requested: total,
            cap,
        });
    }
    Ok(total)
}
