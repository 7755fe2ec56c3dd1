//! Tensor-train square-root Kalman filtering for online regression with
//! product-kernel feature maps, plus dense and rounding-based baselines and
//! an experiment harness.

pub mod error;
pub mod features;
pub mod filter;
pub mod harness;
pub mod baselines;
pub mod linalg;
pub mod tensor;

pub use error::{Error, Result};
