//! Dropout robustness curves: mean test accuracy against dropout rate at a
//! few checkpoints.
//!
//! Before generalization every rate gives chance accuracy. After it, small
//! rates barely matter while large ones still hurt.
//!
//! ```text
//! cargo run --release --example dropout_robustness -- [epochs]
//! ```

use groklab::metrics::{default_drc_rates, dropout_robustness_curve};
use groklab::trainer::{train, CheckpointSchedule, Data, TrainConfig};

fn main() -> groklab::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(2500, |s| s.parse().expect("epochs"));
    let config = TrainConfig {
        epochs,
        checkpoints: CheckpointSchedule::every((epochs / 5).max(1)),
        ..TrainConfig::default()
    };
    let run = train(&config, None)?;
    let data = Data::for_config(&config)?;
    let rates = default_drc_rates();

    print!("{:>6}", "epoch");
    for r in &rates {
        print!(" {r:>6.1}");
    }
    println!();
    for (&epoch, params) in &run.checkpoints {
        let curve = dropout_robustness_curve(params, &config.variant, &data.test_pairs, &data.test_labels, &rates, 50, 7)?;
        print!("{epoch:>6}");
        for p in &curve.points {
            print!(" {:>6.3}", p.mean_accuracy);
        }
        println!();
    }
    Ok(())
}
