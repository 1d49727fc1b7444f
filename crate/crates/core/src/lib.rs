//! Low-rank histogram density estimation on the unit cube.
//!
//! Histograms with `b` bins per axis are identified with probability tensors
//! in `R^{b×…×b}`. Restricting the tensor to a nonnegative PARAFAC
//! (multi-view) or Tucker form of rank `k` gives estimators whose error
//! rate does not degrade with dimension the way the standard histogram's does.

pub mod bounds;
pub mod covers;
mod dense;
pub mod error;
pub mod experiments;
pub mod factorization;
pub mod histogram;
pub mod json;
pub mod lipschitz;
pub mod rng;
pub mod scheffe;
pub mod tensor;

pub use error::{Error, Result};
