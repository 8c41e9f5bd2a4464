use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CodiagonalEnergy, DistributionStats, DrcCurve, GrokkingTimes, McDropoutStats, SparsityReport};
use crate::error::Result;

/// A metric result tied to the run and checkpoint it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config_hash: String,
    pub seed: u64,
    pub epoch: Option<usize>,
    /// The relative anchor that selected this checkpoint, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    pub payload: MetricPayload,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum MetricPayload {
    McDropout {
        rate: f64,
        passes: usize,
        stats: McDropoutStats,
    },
    Drc {
        curve: DrcCurve,
    },
    Cosine {
        /// Row-major `P x P` similarities.
        matrix: Vec<Vec<f64>>,
        energy: CodiagonalEnergy,
    },
    Histogram {
        group: String,
        stats: DistributionStats,
        peaks: Option<(f64, f64)>,
    },
    Sparsity {
        report: SparsityReport,
    },
    GrokkingTimes {
        train_threshold: f64,
        test_threshold: f64,
        times: GrokkingTimes,
    },
}

impl MetricPayload {
    pub fn name(&self) -> &'static str {
        match self {
            Self::McDropout { .. } => "mc_dropout",
            Self::Drc { .. } => "drc",
            Self::Cosine { .. } => "cosine",
            Self::Histogram { .. } => "histogram",
            Self::Sparsity { .. } => "sparsity",
            Self::GrokkingTimes { .. } => "grokking_times",
        }
    }
}

impl MetricReport {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
