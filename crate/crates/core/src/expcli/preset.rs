use serde::{Deserialize, Serialize};

use super::anchor::Anchor;
use crate::error::{Error, Result};
use crate::metrics::default_drc_rates;
use crate::model::{GroupInit, InitSpec};
use crate::trainer::{CheckpointSchedule, TrainConfig};

/// Which parameters a histogram is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistTarget {
    /// The raw embedding table.
    Embedding,
    /// The embedding as the network sees it (after the optional ReLU).
    EmbeddingOutput,
    W1,
    W2,
}

impl HistTarget {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Embedding => "embedding",
            Self::EmbeddingOutput => "embedding_output",
            Self::W1 => "w1",
            Self::W2 => "w2",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    McDropout { rate: f64, passes: usize },
    Drc { rates: Vec<f64>, passes: usize },
    Cosine,
    Histogram { target: HistTarget },
    Sparsity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    /// Every stored checkpoint.
    All,
    /// The stored checkpoint nearest to each resolved anchor.
    Anchors(Vec<Anchor>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRequest {
    pub metric: MetricKind,
    pub at: Checkpoints,
}

/// What to measure after training. `curves` asks the renderer for the
/// log-derived line charts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricPlan {
    pub curves: bool,
    pub requests: Vec<MetricRequest>,
}

impl MetricPlan {
    pub fn is_empty(&self) -> bool {
        !self.curves && self.requests.is_empty()
    }

    fn with(mut self, metric: MetricKind, at: Checkpoints) -> Self {
        self.requests.push(MetricRequest { metric, at });
        self
    }

    fn curves() -> Self {
        Self {
            curves: true,
            requests: Vec::new(),
        }
    }
}

/// Where the shifted-normal initialization of the layer-shift sweep is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftTarget {
    Nowhere,
    Embedding,
    Weights,
}

pub const SHIFTED_NORMAL: GroupInit = GroupInit::Normal { mean: 0.2, std: 0.1 };
pub const CONSTANT_EMBEDDING: GroupInit = GroupInit::Constant { value: 0.1 };
pub const CONSTANT_WEIGHTS: GroupInit = GroupInit::Constant { value: 0.05 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Baseline,
    FrozenEmbedding,
    ReluEmbedding,
    /// Every token starts from the same constant vector.
    ConstantEmbedding,
    /// W1, b1, W2, b2 all start at one constant.
    ConstantWeights,
}

impl Ablation {
    fn label(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::FrozenEmbedding => "frozen_embedding",
            Self::ReluEmbedding => "relu_embedding",
            Self::ConstantEmbedding => "constant_embedding",
            Self::ConstantWeights => "constant_weights",
        }
    }

    fn apply(&self, c: &mut TrainConfig) {
        match self {
            Self::Baseline => {}
            Self::FrozenEmbedding => c.variant.freeze_embedding = true,
            Self::ReluEmbedding => c.variant.relu_after_embedding = true,
            Self::ConstantEmbedding => c.init.embedding = CONSTANT_EMBEDDING,
            Self::ConstantWeights => {
                c.init.hidden = CONSTANT_WEIGHTS;
                c.init.output = CONSTANT_WEIGHTS;
            }
        }
    }
}

/// The quantity varied across the cells of a preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Xavier scale applied to every group.
    Alpha(Vec<f64>),
    WeightDecay(Vec<f64>),
    /// Uniform `[lo, hi]` applied to every group.
    InitInterval(Vec<(f64, f64)>),
    LayerShift(Vec<ShiftTarget>),
    Ablation(Vec<Ablation>),
}

/// One configuration of a preset, trained once per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub label: String,
    /// Numeric position on the axis; ordinal for categorical axes.
    pub value: f64,
    pub config: TrainConfig,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Alpha(_) => "alpha",
            Self::WeightDecay(_) => "weight_decay",
            Self::InitInterval(_) => "init_interval",
            Self::LayerShift(_) => "layer_shift",
            Self::Ablation(_) => "ablation",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Alpha(v) | Self::WeightDecay(v) => v.len(),
            Self::InitInterval(v) => v.len(),
            Self::LayerShift(v) => v.len(),
            Self::Ablation(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values must be finite and pairwise distinct.
    pub fn validate(&self) -> Result<()> {
        let keys: Vec<String> = match self {
            Self::Alpha(v) | Self::WeightDecay(v) => {
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::InvalidConfig(format!("non-finite sweep value {x}")));
                }
                v.iter().map(|x| x.to_bits().to_string()).collect()
            }
            Self::InitInterval(v) => {
                if let Some(&(lo, hi)) = v.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                    return Err(Error::InvalidConfig(format!("bad interval [{lo}, {hi}]")));
                }
                v.iter().map(|(a, b)| format!("{}:{}", a.to_bits(), b.to_bits())).collect()
            }
            Self::LayerShift(v) => v.iter().map(|t| format!("{t:?}")).collect(),
            Self::Ablation(v) => v.iter().map(|t| format!("{t:?}")).collect(),
        };
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != keys.len() {
            return Err(Error::InvalidConfig(format!("duplicate values on the {} axis", self.name())));
        }
        Ok(())
    }

    /// Expands the axis against `base`.
    pub fn cells(&self, base: &TrainConfig) -> Vec<Cell> {
        let with = |label: String, value: f64, f: &dyn Fn(&mut TrainConfig)| {
            let mut config = base.clone();
            f(&mut config);
            Cell { label, value, config }
        };
        match self {
            Self::Alpha(v) => v
                .iter()
                .map(|&a| with(format!("alpha_{a}"), a, &|c| c.init = InitSpec::xavier_scaled(a)))
                .collect(),
            Self::WeightDecay(v) => v
                .iter()
                .map(|&l| with(format!("wd_{l}"), l, &|c| c.optimizer.weight_decay = l))
                .collect(),
            Self::InitInterval(v) => v
                .iter()
                .map(|&(lo, hi)| {
                    with(format!("uniform_{lo}_{hi}"), lo, &|c| {
                        c.init = InitSpec::uniform_all(GroupInit::Uniform { lo, hi })
                    })
                })
                .collect(),
            Self::LayerShift(v) => v
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let label = match t {
                        ShiftTarget::Nowhere => "shift_none",
                        ShiftTarget::Embedding => "shift_embedding",
                        ShiftTarget::Weights => "shift_weights",
                    };
                    with(label.into(), i as f64, &|c| match t {
                        ShiftTarget::Nowhere => {}
                        ShiftTarget::Embedding => c.init.embedding = SHIFTED_NORMAL,
                        ShiftTarget::Weights => {
                            c.init.hidden = SHIFTED_NORMAL;
                            c.init.output = SHIFTED_NORMAL;
                        }
                    })
                })
                .collect(),
            Self::Ablation(v) => v
                .iter()
                .enumerate()
                .map(|(i, a)| with(a.label().into(), i as f64, &|c| a.apply(c)))
                .collect(),
        }
    }
}

pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];

/// A named, reproducible experiment: a base configuration, an optional
/// sweep, the metrics to compute, and the seeds to repeat over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub description: String,
    pub base: TrainConfig,
    pub plan: MetricPlan,
    pub sweep: Option<SweepAxis>,
    pub seeds: Vec<u64>,
}

impl ExperimentPreset {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("a preset needs at least one seed".into()));
        }
        if let Some(axis) = &self.sweep {
            if axis.len() < 2 && !matches!(axis, SweepAxis::Ablation(_)) {
                return Err(Error::InvalidConfig("a sweep needs at least two values".into()));
            }
            axis.validate()?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        match &self.sweep {
            Some(axis) => axis.cells(&self.base),
            None => vec![Cell {
                label: "base".into(),
                value: 0.0,
                config: self.base.clone(),
            }],
        }
    }
}

/// Training budget for the default configuration; long enough for the
/// dropout variance to collapse after grokking.
pub const BASELINE_EPOCHS: usize = 3500;
/// Checkpoint spacing when metrics are taken at anchors.
pub const DENSE_EVERY: usize = 50;

pub const ALPHAS: [f64; 4] = [1.0, 3.0, 5.0, 7.0];
pub const WEIGHT_DECAYS: [f64; 3] = [0.3, 1.0, 3.0];
pub const INIT_INTERVALS: [(f64, f64); 4] = [(-0.2, 0.2), (0.4, 0.8), (1.2, 1.6), (1.6, 2.0)];

fn base(epochs: usize, every: Option<usize>) -> TrainConfig {
    TrainConfig {
        epochs,
        checkpoints: match every {
            Some(k) => CheckpointSchedule::every(k),
            None => CheckpointSchedule::default(),
        },
        ..TrainConfig::default()
    }
}

fn preset(name: &str, description: &str, base: TrainConfig, plan: MetricPlan, sweep: Option<SweepAxis>) -> ExperimentPreset {
    ExperimentPreset {
        name: name.into(),
        description: description.into(),
        base,
        plan,
        sweep,
        seeds: DEFAULT_SEEDS.to_vec(),
    }
}

fn anchors(list: &[Anchor]) -> Checkpoints {
    Checkpoints::Anchors(list.to_vec())
}

/// Every built-in preset, in display order.
pub fn presets() -> Vec<ExperimentPreset> {
    use Anchor::*;
    let dense = || base(BASELINE_EPOCHS, Some(DENSE_EVERY));
    let hist = |t| MetricKind::Histogram { target: t };
    vec![
        preset(
            "fig1",
            "accuracy curves with MC-dropout accuracy variance (p = 0.3, 100 passes) at every checkpoint",
            dense(),
            MetricPlan::curves().with(MetricKind::McDropout { rate: 0.3, passes: 100 }, Checkpoints::All),
            None,
        ),
        preset(
            "fig2",
            "dropout robustness curves before, during and after the test-accuracy rise",
            dense(),
            MetricPlan::curves().with(
                MetricKind::Drc {
                    rates: default_drc_rates(),
                    passes: 100,
                },
                anchors(&[PreRise, RiseOnset, MidRise, Grokked, PostGrok]),
            ),
            None,
        ),
        preset(
            "fig3",
            "embedding cosine-similarity heatmaps and codiagonal energy",
            dense(),
            MetricPlan::default()
                .with(MetricKind::Cosine, anchors(&[Init, TrainFit, MidRise, PostGrok]))
                .with(MetricKind::Cosine, Checkpoints::All),
            None,
        ),
        preset(
            "fig4",
            "parameter histograms after grokking",
            dense(),
            MetricPlan::default()
                .with(hist(HistTarget::Embedding), anchors(&[Init, PostGrok]))
                .with(hist(HistTarget::W1), anchors(&[PostGrok]))
                .with(hist(HistTarget::W2), anchors(&[PostGrok])),
            None,
        ),
        preset(
            "fig5",
            "grokking delay against the Xavier scale factor",
            base(5000, None),
            MetricPlan::curves(),
            Some(SweepAxis::Alpha(ALPHAS.to_vec())),
        ),
        preset(
            "fig6",
            "mean and standard deviation of each parameter group over training",
            base(BASELINE_EPOCHS, None),
            MetricPlan::curves(),
            Some(SweepAxis::Alpha(vec![1.0, 7.0])),
        ),
        preset(
            "fig7",
            "embedding histograms under a shifted uniform [0.4, 0.8] initialization",
            TrainConfig {
                init: InitSpec::uniform_all(GroupInit::Uniform { lo: 0.4, hi: 0.8 }),
                ..dense()
            },
            MetricPlan::curves().with(hist(HistTarget::Embedding), anchors(&[Init, TrainFit, MidRise, PostGrok])),
            None,
        ),
        preset(
            "fig8",
            "hidden and output weight histograms under a shifted uniform [0.4, 0.8] initialization",
            TrainConfig {
                init: InitSpec::uniform_all(GroupInit::Uniform { lo: 0.4, hi: 0.8 }),
                ..dense()
            },
            MetricPlan::default()
                .with(hist(HistTarget::W1), anchors(&[Init, TrainFit, MidRise, PostGrok]))
                .with(hist(HistTarget::W2), anchors(&[Init, TrainFit, MidRise, PostGrok])),
            None,
        ),
        preset(
            "fig9",
            "accuracy curves for uniform initializations on four intervals",
            base(BASELINE_EPOCHS, None),
            MetricPlan::curves(),
            Some(SweepAxis::InitInterval(INIT_INTERVALS.to_vec())),
        ),
        preset(
            "fig10",
            "shifted normal (0.2, 0.1) initialization on embeddings only, weights only, or nowhere",
            base(5000, None),
            MetricPlan::curves(),
            Some(SweepAxis::LayerShift(vec![
                ShiftTarget::Nowhere,
                ShiftTarget::Embedding,
                ShiftTarget::Weights,
            ])),
        ),
        preset(
            "fig11",
            "fraction of inactive hidden units over training",
            base(BASELINE_EPOCHS, None),
            MetricPlan::curves().with(MetricKind::Sparsity, Checkpoints::All),
            None,
        ),
        preset(
            "weight-decay",
            "epoch of the sparsity minimum against weight decay",
            base(1500, None),
            MetricPlan::curves(),
            Some(SweepAxis::WeightDecay(WEIGHT_DECAYS.to_vec())),
        ),
        preset(
            "frozen-embedding",
            "embeddings held at their initial values",
            base(BASELINE_EPOCHS, None),
            MetricPlan::curves()
                .with(MetricKind::Cosine, Checkpoints::All)
                .with(hist(HistTarget::Embedding), anchors(&[Final])),
            Some(SweepAxis::Ablation(vec![Ablation::FrozenEmbedding])),
        ),
        preset(
            "relu-embedding",
            "ReLU after the embedding, compared against the baseline",
            base(5000, Some(250)),
            MetricPlan::curves()
                .with(hist(HistTarget::Embedding), anchors(&[PostGrok]))
                .with(hist(HistTarget::EmbeddingOutput), anchors(&[PostGrok])),
            Some(SweepAxis::Ablation(vec![Ablation::Baseline, Ablation::ReluEmbedding])),
        ),
        preset(
            "constant-init",
            "constant-vector embeddings versus constant non-embedding weights",
            base(1000, None),
            MetricPlan::curves(),
            Some(SweepAxis::Ablation(vec![Ablation::ConstantEmbedding, Ablation::ConstantWeights])),
        ),
    ]
}

pub fn preset_names() -> Vec<String> {
    presets().into_iter().map(|p| p.name).collect()
}

/// Looks up a built-in preset by name.
pub fn find_preset(name: &str) -> Result<ExperimentPreset> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset {
            name: name.into(),
            available: preset_names(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_valid_and_unique() {
        let all = presets();
        let mut names = preset_names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
        for p in &all {
            p.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            for cell in p.cells() {
                cell.config.validate().unwrap_or_else(|e| panic!("{}/{}: {e}", p.name, cell.label));
            }
        }
    }

    #[test]
    fn unknown_preset_lists_available() {
        match find_preset("fig99") {
            Err(Error::UnknownPreset { available, .. }) => assert!(available.contains(&"fig1".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_sweep_values_rejected() {
        assert!(SweepAxis::Alpha(vec![1.0, 1.0]).validate().is_err());
        assert!(SweepAxis::WeightDecay(vec![1.0, f64::NAN]).validate().is_err());
        assert!(SweepAxis::Alpha(vec![1.0, 3.0]).validate().is_ok());
    }

    #[test]
    fn cells_apply_the_axis() {
        let cells = SweepAxis::LayerShift(vec![ShiftTarget::Nowhere, ShiftTarget::Weights]).cells(&TrainConfig::default());
        assert_eq!(cells[0].config.init, InitSpec::default());
        assert_eq!(cells[1].config.init.hidden, SHIFTED_NORMAL);
        assert_eq!(cells[1].config.init.output, SHIFTED_NORMAL);
        assert_eq!(cells[1].config.init.embedding, GroupInit::default());
    }
}
