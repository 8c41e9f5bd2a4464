//! Dense row-major matrices and reproducible random sampling.
//!
//! Everything in the lab is 64-bit floating point. Randomness always flows
//! through a labelled [`RngStream`] so that changing one consumer (say the
//! embedding initializer) never perturbs another (say the split).

pub(crate) mod matrix;
mod rng;
mod sample;

pub use matrix::{matmul, Matrix};
pub use rng::{fnv1a64, RngStream};
pub use sample::{sample, DistributionSpec};
