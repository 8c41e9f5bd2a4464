use std::fs;

use groklab::model::{GroupInit, InitSpec, ModelDims};
use groklab::trainer::{evaluate, train, CheckpointSchedule, Data, EpochRecord, TrainConfig};

fn small(epochs: usize) -> TrainConfig {
    TrainConfig {
        dims: ModelDims {
            modulus: 11,
            embed_dim: 8,
            hidden: 16,
        },
        epochs,
        seed: 4,
        checkpoints: CheckpointSchedule::every(5),
        ..TrainConfig::default()
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train(&small(20), Some(a.path())).unwrap();
    train(&small(20), Some(b.path())).unwrap();
    for name in ["config.json", "log.csv", "activity.csv", "final.bin", "checkpoints/epoch_00010.bin"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn checkpointing_does_not_perturb_training() {
    let quiet = TrainConfig {
        checkpoints: CheckpointSchedule::none(),
        ..small(15)
    };
    let busy = TrainConfig {
        checkpoints: CheckpointSchedule::every(1),
        ..small(15)
    };
    let (a, b) = (train(&quiet, None).unwrap(), train(&busy, None).unwrap());
    let timeless = |log: &[EpochRecord]| {
        log.iter()
            .map(|r| EpochRecord { wall_time: 0.0, ..r.clone() })
            .collect::<Vec<_>>()
    };
    assert_eq!(timeless(&a.log), timeless(&b.log));
    assert_eq!(a.final_params, b.final_params);
    assert!(a.checkpoints.is_empty());
    assert_eq!(b.checkpoints.len(), 16);
}

#[test]
fn evaluation_is_pure() {
    let config = small(5);
    let run = train(&config, None).unwrap();
    let data = Data::for_config(&config).unwrap();
    let before = run.final_params.clone();
    let first = evaluate(&run.final_params, &config.variant, &data.test_pairs, &data.test_labels).unwrap();
    let second = evaluate(&run.final_params, &config.variant, &data.test_pairs, &data.test_labels).unwrap();
    assert_eq!(first, second);
    assert_eq!(run.final_params, before);
    assert_eq!(run.log.last().unwrap().test_acc, first.1);
}

/// Before any update the network predicts at chance: test accuracy lies
/// within three binomial standard deviations of 1/P.
#[test]
fn initial_checkpoint_is_chance_level() {
    let config = TrainConfig {
        epochs: 1,
        checkpoints: CheckpointSchedule::none(),
        ..TrainConfig::default()
    };
    let run = train(&config, None).unwrap();
    let data = Data::for_config(&config).unwrap();
    let chance = 1.0 / config.dims.modulus as f64;
    let sigma = (chance * (1.0 - chance) / data.test_labels.len() as f64).sqrt();
    let acc = run.log[0].test_acc;
    assert_eq!(run.log[0].epoch, 0);
    assert!((acc - chance).abs() <= 3.0 * sigma, "{acc} vs {chance} ± {}", 3.0 * sigma);
}

/// Identical hidden units fed into identical output weights produce the
/// same logit for every class, whatever the embeddings do.
#[test]
fn frozen_constant_weights_never_learn() {
    let config = TrainConfig {
        init: InitSpec {
            hidden: GroupInit::Constant { value: 0.05 },
            output: GroupInit::Constant { value: 0.05 },
            ..InitSpec::default()
        },
        variant: groklab::model::Variant {
            freeze_non_embedding: true,
            ..Default::default()
        },
        checkpoints: CheckpointSchedule::none(),
        ..TrainConfig::default()
    };
    let run = train(&config, None).unwrap();
    assert_eq!(run.log.len(), config.epochs + 1);
    let best = run.log.iter().map(|r| r.train_acc).fold(0.0, f64::max);
    assert!(best < 0.2, "best train accuracy {best}");
}

#[test]
fn early_stop_keeps_the_logged_prefix() {
    let full = TrainConfig {
        dims: ModelDims {
            modulus: 23,
            embed_dim: 32,
            hidden: 128,
        },
        optimizer: groklab::optimizer::OptHyper {
            lr: 2e-3,
            ..Default::default()
        },
        split_fraction: 0.8,
        epochs: 700,
        checkpoints: CheckpointSchedule::none(),
        ..TrainConfig::default()
    };
    let stopped = TrainConfig {
        stop_when_grokked: true,
        ..full.clone()
    };
    let (a, b) = (train(&full, None).unwrap(), train(&stopped, None).unwrap());
    let last = b.log.last().unwrap();
    assert!(b.log.len() < a.log.len(), "run did not grok within the budget");
    assert!(last.test_acc >= 0.95);
    assert!(b.log.iter().any(|r| r.train_acc >= 0.99));
    assert!(b.log[..b.log.len() - 1].iter().all(|r| r.test_acc < 0.95));
    for (x, y) in a.log.iter().zip(&b.log) {
        assert_eq!(EpochRecord { wall_time: 0.0, ..x.clone() }, EpochRecord { wall_time: 0.0, ..y.clone() });
    }
}
