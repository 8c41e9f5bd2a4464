//! The training loop, its configuration, and persisted run artifacts.
//!
//! A run directory looks like:
//!
//! ```text
//! <dir>/config.json
//! <dir>/log.csv
//! <dir>/activity.csv
//! <dir>/checkpoints/epoch_00450.bin
//! ```

mod log;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use log::{
    read_log_csv, write_activity_csv, write_log_csv, EpochRecord, ACTIVITY_HEADER, LOG_HEADER,
};

use crate::dataset::{ModTask, Split};
use crate::error::{Error, Result};
use crate::metrics::{activity_from_hidden, moments, DEFAULT_TEST_THRESHOLD, DEFAULT_TRAIN_THRESHOLD};
use crate::model::{
    backward, forward, init_params, loss_and_accuracy, read_checkpoint, write_checkpoint,
    DropoutSpec, InitSpec, ModelDims, ModelParams, Variant,
};
use crate::numerics::{fnv1a64, RngStream};
use crate::optimizer::{step, AdamWState, OptHyper};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchMode {
    Full,
    Mini { size: usize },
}

impl Default for BatchMode {
    fn default() -> Self {
        Self::Mini { size: 128 }
    }
}

/// Epochs at which parameters are snapshotted. Entries past the run's
/// budget are ignored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointSchedule {
    #[serde(default)]
    pub epochs: Vec<usize>,
    #[serde(default)]
    pub every: Option<usize>,
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        Self {
            epochs: vec![0, 150, 300, 450, 600, 1000, 1200, 1500, 1650, 2000, 2500],
            every: Some(250),
        }
    }
}

impl CheckpointSchedule {
    pub fn every(k: usize) -> Self {
        Self {
            epochs: vec![0],
            every: Some(k),
        }
    }

    pub fn none() -> Self {
        Self {
            epochs: Vec::new(),
            every: None,
        }
    }

    pub fn contains(&self, epoch: usize) -> bool {
        self.epochs.contains(&epoch) || self.every.is_some_and(|k| k > 0 && epoch.is_multiple_of(k))
    }

    /// Sorted scheduled epochs within `0..=budget`.
    pub fn resolve(&self, budget: usize) -> Vec<usize> {
        (0..=budget).filter(|&e| self.contains(e)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dims: ModelDims,
    pub init: InitSpec,
    pub variant: Variant,
    pub optimizer: OptHyper,
    /// Fraction of all pairs used for training.
    pub split_fraction: f64,
    pub epochs: usize,
    pub batch: BatchMode,
    pub seed: u64,
    pub checkpoints: CheckpointSchedule,
    /// Dropout during training updates; evaluation never uses dropout.
    pub train_dropout: Option<DropoutSpec>,
    /// End the run at the first epoch by which both default grokking
    /// thresholds have been crossed. Epochs up to that point are unchanged.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub stop_when_grokked: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dims: ModelDims::default(),
            init: InitSpec::default(),
            variant: Variant::default(),
            optimizer: OptHyper::default(),
            split_fraction: 0.5,
            epochs: 3000,
            batch: BatchMode::default(),
            seed: 0,
            checkpoints: CheckpointSchedule::default(),
            train_dropout: None,
            stop_when_grokked: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.init.validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidFraction(self.split_fraction));
        }
        if let BatchMode::Mini { size: 0 } = self.batch {
            return Err(Error::InvalidConfig("mini-batch size must be positive".into()));
        }
        if let Some(d) = &self.train_dropout {
            d.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Stable 64-bit hash of the canonical JSON form, as 16 hex digits.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }
}

/// The task, its split, and the gathered token pairs for each side.
#[derive(Clone, Debug)]
pub struct Data {
    pub task: ModTask,
    pub split: Split,
    pub train_pairs: Vec<(usize, usize)>,
    pub train_labels: Vec<usize>,
    pub test_pairs: Vec<(usize, usize)>,
    pub test_labels: Vec<usize>,
}

impl Data {
    /// Rebuilds the exact task and split a config trains on.
    pub fn for_config(config: &TrainConfig) -> Result<Self> {
        let task = ModTask::generate(config.dims.modulus)?;
        let master = RngStream::new(config.seed, "master");
        let split = task.split(config.split_fraction, &mut master.derive("split"))?;
        let (train_pairs, train_labels) = task.batch(&split.train);
        let (test_pairs, test_labels) = task.batch(&split.test);
        Ok(Self {
            task,
            split,
            train_pairs,
            train_labels,
            test_pairs,
            test_labels,
        })
    }

    pub fn all_pairs(&self) -> (Vec<(usize, usize)>, Vec<usize>) {
        self.task.batch(&self.task.all_indices())
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub config: TrainConfig,
    pub log: Vec<EpochRecord>,
    pub checkpoints: BTreeMap<usize, ModelParams>,
    pub final_params: ModelParams,
    pub dir: Option<PathBuf>,
}

impl RunArtifacts {
    pub fn record(&self, epoch: usize) -> Option<&EpochRecord> {
        self.log.get(epoch).filter(|r| r.epoch == epoch)
    }

    /// Checkpoint at the scheduled epoch closest to `epoch`.
    pub fn nearest_checkpoint(&self, epoch: usize) -> Option<(usize, &ModelParams)> {
        self.checkpoints
            .iter()
            .min_by_key(|(&e, _)| e.abs_diff(epoch))
            .map(|(&e, p)| (e, p))
    }

    /// Reloads a run directory written by [`train`].
    pub fn load(dir: &Path) -> Result<Self> {
        let need = |name: &str| -> Result<PathBuf> {
            let p = dir.join(name);
            if p.exists() {
                Ok(p)
            } else {
                Err(Error::MissingFile(p))
            }
        };
        let config = TrainConfig::from_json(&fs::read_to_string(need("config.json")?)?)?;
        let activity = dir.join("activity.csv");
        let activity = if activity.exists() {
            Some(fs::File::open(activity)?)
        } else {
            None
        };
        let log = read_log_csv(fs::File::open(need("log.csv")?)?, activity)?;
        let mut checkpoints = BTreeMap::new();
        let ckdir = dir.join("checkpoints");
        if ckdir.is_dir() {
            for entry in fs::read_dir(&ckdir)? {
                let path = entry?.path();
                let epoch = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .and_then(|s| s.strip_prefix("epoch_"))
                    .and_then(|s| s.parse::<usize>().ok());
                if let Some(epoch) = epoch {
                    checkpoints.insert(epoch, read_checkpoint(&path)?);
                }
            }
        }
        let final_path = dir.join("final.bin");
        let final_params = if final_path.exists() {
            read_checkpoint(&final_path)?
        } else {
            checkpoints
                .values()
                .next_back()
                .cloned()
                .ok_or(Error::MissingFile(final_path))?
        };
        Ok(Self {
            config,
            log,
            checkpoints,
            final_params,
            dir: Some(dir.to_path_buf()),
        })
    }
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("epoch_{epoch:05}.bin"))
}

/// Dropout-free loss and accuracy over a set of examples.
pub fn evaluate(
    params: &ModelParams,
    variant: &Variant,
    pairs: &[(usize, usize)],
    labels: &[usize],
) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let trace = forward(params, variant, pairs, None, None)?;
    loss_and_accuracy(&trace.logits, labels)
}

fn measure(
    epoch: usize,
    params: &ModelParams,
    variant: &Variant,
    data: &Data,
    started: Instant,
) -> Result<EpochRecord> {
    let train = forward(params, variant, &data.train_pairs, None, None)?;
    let test = forward(params, variant, &data.test_pairs, None, None)?;
    let (train_loss, train_acc) = loss_and_accuracy(&train.logits, &data.train_labels)?;
    let (_, test_acc) = loss_and_accuracy(&test.logits, &data.test_labels)?;
    let activity = activity_from_hidden(&[&train.hidden, &test.hidden])?;
    let (emb_mean, emb_std) = moments(params.embedding.data())?;
    let (w1_mean, w1_std) = moments(params.w1.data())?;
    let (w2_mean, w2_std) = moments(params.w2.data())?;
    Ok(EpochRecord {
        epoch,
        train_loss,
        train_acc,
        test_acc,
        emb_mean,
        emb_std,
        w1_mean,
        w1_std,
        w2_mean,
        w2_std,
        dead_frac: activity.dead_fraction,
        inactive_frac: activity.inactive_fraction,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Trains a model, persisting artifacts under `out` when given.
pub fn train(config: &TrainConfig, out: Option<&Path>) -> Result<RunArtifacts> {
    train_with(config, out, |_| {})
}

/// [`train`] with a callback after every logged epoch.
pub fn train_with(
    config: &TrainConfig,
    out: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<RunArtifacts> {
    config.validate()?;
    let started = Instant::now();
    let data = Data::for_config(config)?;
    let master = RngStream::new(config.seed, "master");
    let mut params = init_params(config.dims, &config.init, &master)?;
    let mut state = AdamWState::new(&params);
    let mut shuffle_rng = master.derive("batch.shuffle");
    let mut dropout_rng = master.derive("dropout.train");
    let variant = config.variant;

    if let Some(dir) = out {
        fs::create_dir_all(dir.join("checkpoints"))?;
        fs::write(dir.join("config.json"), config.to_json()?)?;
    }

    let mut log = Vec::with_capacity(config.epochs + 1);
    let mut checkpoints = BTreeMap::new();
    let mut snapshot = |epoch: usize, params: &ModelParams| -> Result<()> {
        if config.checkpoints.contains(epoch) {
            if let Some(dir) = out {
                write_checkpoint(&checkpoint_path(dir, epoch), params)?;
            }
            checkpoints.insert(epoch, params.clone());
        }
        Ok(())
    };

    let first = measure(0, &params, &variant, &data, started)?;
    on_epoch(&first);
    log.push(first);
    snapshot(0, &params)?;

    let n_train = data.train_pairs.len();
    let batch_size = match config.batch {
        BatchMode::Full => n_train,
        BatchMode::Mini { size } => size.min(n_train),
    };
    let mut order: Vec<usize> = (0..n_train).collect();
    let (mut fit, mut general) = (false, false);
    let mut pairs = Vec::with_capacity(batch_size);
    let mut labels = Vec::with_capacity(batch_size);

    for epoch in 1..=config.epochs {
        if matches!(config.batch, BatchMode::Mini { .. }) {
            order.shuffle(&mut shuffle_rng);
        }
        for chunk in order.chunks(batch_size) {
            pairs.clear();
            labels.clear();
            pairs.extend(chunk.iter().map(|&k| data.train_pairs[k]));
            labels.extend(chunk.iter().map(|&k| data.train_labels[k]));
            let trace = forward(
                &params,
                &variant,
                &pairs,
                config.train_dropout.as_ref(),
                Some(&mut dropout_rng),
            )?;
            let grads = backward(&params, &variant, &trace, &labels)?;
            step(&mut params, &grads, &mut state, &config.optimizer, &variant).map_err(|e| match e {
                Error::PoisonedGradient { group } => Error::NonFinite {
                    epoch,
                    quantity: format!("gradient of {group}"),
                },
                other => other,
            })?;
        }
        if let Some((name, _)) = params.named().iter().find(|(_, m)| !m.is_finite()) {
            return Err(Error::NonFinite {
                epoch,
                quantity: format!("parameter {name}"),
            });
        }
        let record = measure(epoch, &params, &variant, &data, started)?;
        if !record.train_loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                quantity: "train loss".into(),
            });
        }
        fit |= record.train_acc >= DEFAULT_TRAIN_THRESHOLD;
        general |= record.test_acc >= DEFAULT_TEST_THRESHOLD;
        on_epoch(&record);
        log.push(record);
        snapshot(epoch, &params)?;
        if config.stop_when_grokked && fit && general {
            break;
        }
    }

    if let Some(dir) = out {
        let mut f = fs::File::create(dir.join("log.csv"))?;
        write_log_csv(&log, &mut f)?;
        let mut f = fs::File::create(dir.join("activity.csv"))?;
        write_activity_csv(&log, &mut f)?;
        write_checkpoint(&dir.join("final.bin"), &params)?;
    }

    Ok(RunArtifacts {
        config: config.clone(),
        log,
        checkpoints,
        final_params: params,
        dir: out.map(Path::to_path_buf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> TrainConfig {
        TrainConfig {
            dims: ModelDims {
                modulus: 7,
                embed_dim: 4,
                hidden: 8,
            },
            epochs: 5,
            batch: BatchMode::Mini { size: 8 },
            checkpoints: CheckpointSchedule::every(2),
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_resolution() {
        let s = CheckpointSchedule::default();
        let r = s.resolve(1000);
        assert_eq!(&r[..6], &[0, 150, 250, 300, 450, 500]);
        assert!(r.contains(&1000));
        assert!(!r.contains(&1200));
    }

    #[test]
    fn config_json_round_trip_and_partial_documents() {
        let cfg = small_config();
        assert_eq!(TrainConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
        let partial = TrainConfig::from_json(r#"{"epochs": 10, "batch": {"kind": "full"}}"#).unwrap();
        assert_eq!(partial.epochs, 10);
        assert_eq!(partial.batch, BatchMode::Full);
        assert_eq!(partial.dims, ModelDims::default());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small_config();
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.split_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn log_shape_and_checkpoints() {
        let run = train(&small_config(), None).unwrap();
        assert_eq!(run.log.len(), 6);
        assert!(run.log.windows(2).all(|w| w[0].epoch < w[1].epoch));
        assert_eq!(run.checkpoints.keys().copied().collect::<Vec<_>>(), vec![0, 2, 4]);
        for r in &run.log {
            assert!((0.0..=1.0).contains(&r.train_acc));
            assert!((0.0..=1.0).contains(&r.test_acc));
        }
    }

    #[test]
    fn hash_depends_on_config() {
        let a = small_config();
        let mut b = small_config();
        b.seed += 1;
        assert_eq!(a.hash(), small_config().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
