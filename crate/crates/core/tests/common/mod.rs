#![allow(dead_code)]

use groklab::model::{
    backward, forward, init_params, loss_and_accuracy, DropoutSpec, Gradients, InitSpec,
    ModelDims, ModelParams, Variant,
};
use groklab::numerics::RngStream;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;

/// Every combination of the three variant flags.
pub fn all_variants() -> Vec<Variant> {
    (0..8)
        .map(|bits| Variant {
            relu_after_embedding: bits & 1 != 0,
            freeze_embedding: bits & 2 != 0,
            freeze_non_embedding: bits & 4 != 0,
        })
        .collect()
}

pub fn tiny_instance(seed: u64) -> (ModelParams, Vec<(usize, usize)>, Vec<usize>) {
    let dims = ModelDims {
        modulus: 5,
        embed_dim: 3,
        hidden: 4,
    };
    let params = init_params(dims, &InitSpec::xavier_scaled(2.0), &RngStream::new(seed, "fd")).unwrap();
    let pairs: Vec<_> = (0..5).flat_map(|a| (0..5).map(move |b| (a, b))).collect();
    let labels = pairs.iter().map(|(a, b)| (a + b) % 5).collect();
    (params, pairs, labels)
}

fn loss(
    params: &ModelParams,
    variant: &Variant,
    pairs: &[(usize, usize)],
    labels: &[usize],
    dropout: Option<&DropoutSpec>,
) -> f64 {
    // A fresh stream per evaluation replays identical masks.
    let mut rng = RngStream::new(99, "fd.dropout");
    let t = forward(params, variant, pairs, dropout, Some(&mut rng)).unwrap();
    loss_and_accuracy(&t.logits, labels).unwrap().0
}

/// Central differences for every parameter entry.
pub fn finite_difference(
    params: &ModelParams,
    variant: &Variant,
    pairs: &[(usize, usize)],
    labels: &[usize],
    dropout: Option<&DropoutSpec>,
) -> Gradients {
    let mut grads = ModelParams::zeros(params.dims());
    let mut probe = params.clone();
    for k in 0..5 {
        let n = params.named()[k].1.len();
        for i in 0..n {
            let orig = params.named()[k].1.data()[i];
            probe.named_mut()[k].1.data_mut()[i] = orig + FD_STEP;
            let up = loss(&probe, variant, pairs, labels, dropout);
            probe.named_mut()[k].1.data_mut()[i] = orig - FD_STEP;
            let down = loss(&probe, variant, pairs, labels, dropout);
            probe.named_mut()[k].1.data_mut()[i] = orig;
            grads.named_mut()[k].1.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
        }
    }
    grads
}

pub fn analytic(
    params: &ModelParams,
    variant: &Variant,
    pairs: &[(usize, usize)],
    labels: &[usize],
    dropout: Option<&DropoutSpec>,
) -> Gradients {
    let mut rng = RngStream::new(99, "fd.dropout");
    let t = forward(params, variant, pairs, dropout, Some(&mut rng)).unwrap();
    backward(params, variant, &t, labels).unwrap()
}

/// Relative error with a floor so that two near-zero values compare by
/// absolute difference.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst relative error over unfrozen groups, and whether every frozen
/// group's gradient is exactly zero.
pub fn compare(
    params: &ModelParams,
    variant: &Variant,
    pairs: &[(usize, usize)],
    labels: &[usize],
    dropout: Option<&DropoutSpec>,
) -> (f64, bool) {
    let got = analytic(params, variant, pairs, labels, dropout);
    let want = finite_difference(params, variant, pairs, labels, dropout);
    let mut worst = 0.0f64;
    let mut frozen_zero = true;
    for (((_, g), (_, w)), group) in got.named().iter().zip(want.named().iter()).zip(ModelParams::GROUPS) {
        if variant.is_frozen(group) {
            frozen_zero &= g.data().iter().all(|&x| x == 0.0);
        } else {
            for (a, b) in g.data().iter().zip(w.data()) {
                worst = worst.max(rel_err(*a, *b));
            }
        }
    }
    (worst, frozen_zero)
}
