//! Shared frailty models for clustered survival data: simulation of
//! clustered event times, pseudo-full-likelihood estimation, and
//! sandwich/bootstrap covariance estimates.

pub mod coxinit;
pub mod data;
pub mod datagen;
pub mod error;
pub mod fit;
pub mod frailty;
pub mod numerics;
pub mod pool;
pub mod sim;
pub mod variance;

#[cfg(test)]
mod testutil;

pub use data::{ClusteredDataset, Record};
pub use error::{FrailtyError, Result};
