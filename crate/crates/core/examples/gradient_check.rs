//! Compares backpropagated gradients with central finite differences on a
//! tiny model, for every combination of the variant flags.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use groklab::model::{backward, forward, init_params, loss_and_accuracy, InitSpec, ModelDims, ModelParams, Variant};
use groklab::numerics::RngStream;

fn loss(p: &ModelParams, v: &Variant, pairs: &[(usize, usize)], labels: &[usize]) -> f64 {
    let t = forward(p, v, pairs, None, None).expect("forward");
    loss_and_accuracy(&t.logits, labels).expect("loss").0
}

fn main() -> groklab::Result<()> {
    let dims = ModelDims {
        modulus: 5,
        embed_dim: 3,
        hidden: 4,
    };
    let params = init_params(dims, &InitSpec::xavier_scaled(2.0), &RngStream::new(1, "example"))?;
    let pairs: Vec<(usize, usize)> = (0..5).flat_map(|a| (0..5).map(move |b| (a, b))).collect();
    let labels: Vec<usize> = pairs.iter().map(|(a, b)| (a + b) % 5).collect();
    let h = 1e-5;

    for bits in 0..8u8 {
        let v = Variant {
            relu_after_embedding: bits & 1 != 0,
            freeze_embedding: bits & 2 != 0,
            freeze_non_embedding: bits & 4 != 0,
        };
        let trace = forward(&params, &v, &pairs, None, None)?;
        let grads = backward(&params, &v, &trace, &labels)?;
        let mut worst = 0.0f64;
        let mut probe = params.clone();
        for (k, group) in ModelParams::GROUPS.iter().enumerate() {
            if v.is_frozen(*group) {
                continue;
            }
            for i in 0..params.named()[k].1.len() {
                let x = params.named()[k].1.data()[i];
                probe.named_mut()[k].1.data_mut()[i] = x + h;
                let up = loss(&probe, &v, &pairs, &labels);
                probe.named_mut()[k].1.data_mut()[i] = x - h;
                let down = loss(&probe, &v, &pairs, &labels);
                probe.named_mut()[k].1.data_mut()[i] = x;
                let fd = (up - down) / (2.0 * h);
                let g = grads.named()[k].1.data()[i];
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
            }
        }
        println!("{v:?}: worst relative error {worst:.2e}");
    }
    Ok(())
}
