mod common;

use common::{all_variants, compare, tiny_instance, FD_REL_TOL};
use groklab::model::{DropoutPlacement, DropoutSpec};

#[test]
fn backprop_matches_central_differences() {
    let (params, pairs, labels) = tiny_instance(17);
    for variant in all_variants() {
        let (worst, frozen_zero) = compare(&params, &variant, &pairs, &labels, None);
        assert!(worst < FD_REL_TOL, "{variant:?}: rel err {worst}");
        assert!(frozen_zero, "{variant:?}: frozen gradient not zero");
    }
}

#[test]
fn backprop_replays_dropout_masks() {
    let (params, pairs, labels) = tiny_instance(23);
    for placement in [DropoutPlacement::Hidden, DropoutPlacement::HiddenAndEmbedding] {
        let spec = DropoutSpec { rate: 0.3, placement };
        for variant in all_variants() {
            let (worst, frozen_zero) = compare(&params, &variant, &pairs, &labels, Some(&spec));
            assert!(worst < FD_REL_TOL, "{variant:?} {placement:?}: rel err {worst}");
            assert!(frozen_zero);
        }
    }
}

#[test]
fn several_random_instances() {
    for seed in 0..5 {
        let (params, pairs, labels) = tiny_instance(seed);
        let (worst, _) = compare(&params, &Default::default(), &pairs, &labels, None);
        assert!(worst < FD_REL_TOL, "seed {seed}: rel err {worst}");
    }
}
