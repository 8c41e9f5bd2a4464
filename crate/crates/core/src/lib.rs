//! Grokking laboratory for modular addition.
//!
//! Trains the embedding + one-hidden-layer ReLU MLP on `(a + b) mod P` and
//! measures the signals that precede delayed generalization: accuracy
//! variance under Monte-Carlo dropout, dropout robustness curves, cosine
//! structure of the embeddings, parameter distributions, and ReLU sparsity.

pub mod dataset;
pub mod error;
pub mod expcli;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod optimizer;
pub mod trainer;

pub use error::{Error, Result};
