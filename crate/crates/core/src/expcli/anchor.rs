use serde::{Deserialize, Serialize};

use crate::metrics::GrokkingTimes;
use crate::trainer::EpochRecord;

/// Test accuracy at which the rise is considered to have started.
pub const RISE_ONSET_ACC: f64 = 0.1;
/// Test accuracy marking the middle of the rise.
pub const MID_RISE_ACC: f64 = 0.5;

/// A checkpoint chosen relative to a run's own dynamics rather than an
/// absolute epoch, so that the same preset selects comparable moments
/// across seeds and configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Init,
    /// `t_train`.
    TrainFit,
    /// Halfway between `t_train` and the rise onset: memorized, not yet
    /// generalizing.
    PreRise,
    /// First epoch with test accuracy at least [`RISE_ONSET_ACC`].
    RiseOnset,
    /// First epoch with test accuracy at least [`MID_RISE_ACC`].
    MidRise,
    /// `t_test`.
    Grokked,
    /// The last epoch, provided the run grokked.
    PostGrok,
    Final,
    Epoch(usize),
}

impl Anchor {
    pub fn label(&self) -> String {
        match self {
            Self::Init => "init".into(),
            Self::TrainFit => "t_train".into(),
            Self::PreRise => "pre_rise".into(),
            Self::RiseOnset => "rise_onset".into(),
            Self::MidRise => "mid_rise".into(),
            Self::Grokked => "t_test".into(),
            Self::PostGrok => "post_grok".into(),
            Self::Final => "final".into(),
            Self::Epoch(e) => format!("epoch_{e}"),
        }
    }

    /// The target epoch, or `None` when the run never reached the moment.
    pub fn resolve(&self, log: &[EpochRecord], times: &GrokkingTimes) -> Option<usize> {
        let last = log.last()?.epoch;
        let first_test = |acc: f64| {
            log.iter()
                .skip(times.t_train.unwrap_or(0))
                .find(|r| r.test_acc >= acc)
                .map(|r| r.epoch)
        };
        match *self {
            Self::Init => Some(0),
            Self::TrainFit => times.t_train,
            Self::PreRise => {
                let t = times.t_train?;
                let onset = first_test(RISE_ONSET_ACC).unwrap_or(last);
                Some(t + (onset.saturating_sub(t)) / 2)
            }
            Self::RiseOnset => first_test(RISE_ONSET_ACC),
            Self::MidRise => first_test(MID_RISE_ACC),
            Self::Grokked => times.t_test,
            Self::PostGrok => times.t_test.map(|_| last),
            Self::Final => Some(last),
            Self::Epoch(e) => (e <= last).then_some(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::grokking_times;

    fn log(test: &[f64]) -> Vec<EpochRecord> {
        test.iter()
            .enumerate()
            .map(|(epoch, &t)| EpochRecord {
                epoch,
                train_acc: if epoch >= 2 { 1.0 } else { 0.0 },
                test_acc: t,
                ..Default::default()
            })
            .collect()
    }

    #[test]
    fn anchors_follow_the_curve() {
        let l = log(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.6, 0.97, 1.0]);
        let t = grokking_times(&l, 0.99, 0.95);
        let at = |a: Anchor| a.resolve(&l, &t);
        assert_eq!(at(Anchor::Init), Some(0));
        assert_eq!(at(Anchor::TrainFit), Some(2));
        assert_eq!(at(Anchor::RiseOnset), Some(6));
        assert_eq!(at(Anchor::PreRise), Some(4));
        assert_eq!(at(Anchor::MidRise), Some(7));
        assert_eq!(at(Anchor::Grokked), Some(8));
        assert_eq!(at(Anchor::PostGrok), Some(9));
        assert_eq!(at(Anchor::Epoch(12)), None);
    }

    #[test]
    fn no_grok_leaves_post_grok_unresolved() {
        let l = log(&[0.0, 0.0, 0.0, 0.1]);
        let t = grokking_times(&l, 0.99, 0.95);
        assert_eq!(Anchor::PostGrok.resolve(&l, &t), None);
        assert_eq!(Anchor::Final.resolve(&l, &t), Some(3));
    }

    #[test]
    fn serde_names() {
        assert_eq!(serde_json::to_string(&Anchor::MidRise).unwrap(), "\"mid_rise\"");
        assert_eq!(serde_json::to_string(&Anchor::Epoch(300)).unwrap(), "{\"epoch\":300}");
    }
}
