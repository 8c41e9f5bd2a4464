use serde::{Deserialize, Serialize};

use crate::trainer::EpochRecord;

pub const DEFAULT_TRAIN_THRESHOLD: f64 = 0.99;
pub const DEFAULT_TEST_THRESHOLD: f64 = 0.95;

/// First epochs at which train and test accuracy reach their thresholds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrokkingTimes {
    pub t_train: Option<usize>,
    pub t_test: Option<usize>,
    /// `t_test - t_train` when both exist.
    pub delay: Option<i64>,
}

impl GrokkingTimes {
    pub fn grokked(&self) -> bool {
        self.t_test.is_some()
    }
}

pub fn grokking_times(log: &[EpochRecord], train_threshold: f64, test_threshold: f64) -> GrokkingTimes {
    let t_train = log.iter().find(|r| r.train_acc >= train_threshold).map(|r| r.epoch);
    let t_test = log.iter().find(|r| r.test_acc >= test_threshold).map(|r| r.epoch);
    let delay = match (t_train, t_test) {
        (Some(a), Some(b)) => Some(b as i64 - a as i64),
        _ => None,
    };
    GrokkingTimes {
        t_train,
        t_test,
        delay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(train_jump: usize, test_jump: Option<usize>, len: usize) -> Vec<EpochRecord> {
        (0..len)
            .map(|epoch| EpochRecord {
                epoch,
                train_loss: 0.0,
                train_acc: if epoch >= train_jump { 1.0 } else { 0.2 },
                test_acc: if test_jump.is_some_and(|t| epoch >= t) { 1.0 } else { 0.02 },
                emb_mean: 0.0,
                emb_std: 0.0,
                w1_mean: 0.0,
                w1_std: 0.0,
                w2_mean: 0.0,
                w2_std: 0.0,
                dead_frac: 0.0,
                inactive_frac: 0.0,
                wall_time: 0.0,
            })
            .collect()
    }

    #[test]
    fn direct_scan() {
        let g = grokking_times(&log(300, Some(1500), 2000), 0.99, 0.95);
        assert_eq!(g.t_train, Some(300));
        assert_eq!(g.t_test, Some(1500));
        assert_eq!(g.delay, Some(1200));
    }

    #[test]
    fn never_crossing() {
        let g = grokking_times(&log(300, None, 2000), 0.99, 0.95);
        assert_eq!(g.t_train, Some(300));
        assert_eq!(g.t_test, None);
        assert_eq!(g.delay, None);
        assert!(!g.grokked());
    }
}
