//! Grokking diagnostics computed from parameter snapshots and epoch logs.
//!
//! All functions here are pure: they never touch training state, and any
//! randomness (MC dropout) comes from a stream seeded by the caller.

mod cosine;
mod distribution;
mod dropout;
mod grokking;
mod report;
mod sparsity;

pub use cosine::{codiagonal_energy, cosine_similarity_matrix, null_codiagonal_energies, CodiagonalEnergy};
pub use distribution::{detect_bimodality, distribution_stats, moments, DistributionStats, Histogram};
pub use dropout::{
    default_drc_rates, dropout_robustness_curve, mc_dropout_stats, DrcCurve, DrcPoint,
    McDropoutConfig, McDropoutStats,
};
pub use grokking::{grokking_times, GrokkingTimes, DEFAULT_TEST_THRESHOLD, DEFAULT_TRAIN_THRESHOLD};
pub use report::{MetricPayload, MetricReport};
pub use sparsity::{activity_from_hidden, sparsity, SparsityReport};
