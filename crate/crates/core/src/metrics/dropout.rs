use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward, loss_and_accuracy, DropoutPlacement, DropoutSpec, ModelParams, Variant};
use crate::numerics::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McDropoutConfig {
    pub rate: f64,
    pub passes: usize,
    pub seed: u64,
    #[serde(default)]
    pub placement: DropoutPlacement,
}

impl Default for McDropoutConfig {
    fn default() -> Self {
        Self {
            rate: 0.3,
            passes: 100,
            seed: 0,
            placement: DropoutPlacement::Hidden,
        }
    }
}

/// Accuracy spread over repeated masked passes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McDropoutStats {
    pub mean: f64,
    /// Population variance (divides by N).
    pub variance: f64,
    /// Per-pass accuracies in pass order.
    pub accuracies: Vec<f64>,
}

/// Mean and population variance, computed on the sorted values shifted by
/// their minimum so the result does not depend on pass order and is exactly
/// zero when all values agree.
fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let shift = sorted[0];
    let n = sorted.len() as f64;
    let (s1, s2) = sorted.iter().fold((0.0, 0.0), |(s1, s2), &x| {
        let d = x - shift;
        (s1 + d, s2 + d * d)
    });
    let mean_shift = s1 / n;
    let variance = (s2 / n - mean_shift * mean_shift).max(0.0);
    (shift + mean_shift, variance)
}

/// Runs `cfg.passes` independent dropout passes over a fixed example set
/// with the weights held constant.
pub fn mc_dropout_stats(
    params: &ModelParams,
    variant: &Variant,
    pairs: &[(usize, usize)],
    labels: &[usize],
    cfg: &McDropoutConfig,
) -> Result<McDropoutStats> {
    if cfg.passes < 2 {
        return Err(Error::InvalidConfig(format!(
            "MC dropout needs at least 2 passes, got {}",
            cfg.passes
        )));
    }
    let spec = DropoutSpec {
        rate: cfg.rate,
        placement: cfg.placement,
    };
    spec.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut rng = RngStream::new(cfg.seed, "dropout.mc");
    let accuracies = (0..cfg.passes)
        .map(|_| {
            let trace = forward(params, variant, pairs, Some(&spec), Some(&mut rng))?;
            loss_and_accuracy(&trace.logits, labels).map(|(_, acc)| acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, variance) = mean_and_variance(&accuracies);
    Ok(McDropoutStats {
        mean,
        variance,
        accuracies,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrcPoint {
    pub rate: f64,
    pub mean_accuracy: f64,
    pub variance: f64,
}

/// Test accuracy against inference dropout rate at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrcCurve {
    pub epoch: Option<usize>,
    pub points: Vec<DrcPoint>,
}

impl DrcCurve {
    /// Mean accuracy at the grid point closest to `rate`.
    pub fn accuracy_at(&self, rate: f64) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| (a.rate - rate).abs().total_cmp(&(b.rate - rate).abs()))
            .map(|p| p.mean_accuracy)
    }
}

/// `0.0, 0.1, ..., 0.9`.
pub fn default_drc_rates() -> Vec<f64> {
    (0..10).map(|k| k as f64 / 10.0).collect()
}

/// MC dropout statistics on a grid of rates in `[0, 0.9]`.
pub fn dropout_robustness_curve(
    params: &ModelParams,
    variant: &Variant,
    pairs: &[(usize, usize)],
    labels: &[usize],
    rates: &[f64],
    passes: usize,
    seed: u64,
) -> Result<DrcCurve> {
    if rates.is_empty() {
        return Err(Error::InvalidConfig("empty dropout rate grid".into()));
    }
    if let Some(&bad) = rates.iter().find(|r| !(0.0..=0.9).contains(*r)) {
        return Err(Error::InvalidRate(bad));
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("dropout rates must be strictly increasing".into()));
    }
    let points = rates
        .iter()
        .map(|&rate| {
            let cfg = McDropoutConfig {
                rate,
                passes,
                seed,
                placement: DropoutPlacement::Hidden,
            };
            let s = mc_dropout_stats(params, variant, pairs, labels, &cfg)?;
            Ok(DrcPoint {
                rate,
                mean_accuracy: s.mean,
                variance: s.variance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DrcCurve {
        epoch: None,
        points,
    })
}
