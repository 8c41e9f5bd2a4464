//! Accuracy variance under Monte-Carlo dropout across training.
//!
//! The weights at each checkpoint are held fixed while 100 passes with
//! hidden-layer dropout (p = 0.3) are evaluated on the test set. The spread
//! of those accuracies rises while the test accuracy climbs and collapses
//! once the model has generalized.
//!
//! ```text
//! cargo run --release --example mc_dropout_variance -- [epochs] [every]
//! ```

use groklab::metrics::{mc_dropout_stats, McDropoutConfig};
use groklab::trainer::{train, CheckpointSchedule, Data, TrainConfig};

fn main() -> groklab::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(2500, |s| s.parse().expect("epochs"));
    let every = args.next().map_or(100, |s| s.parse().expect("every"));

    let config = TrainConfig {
        epochs,
        checkpoints: CheckpointSchedule::every(every),
        ..TrainConfig::default()
    };
    let run = train(&config, None)?;
    let data = Data::for_config(&config)?;
    let mc = McDropoutConfig::default();

    println!("{:>6} {:>9} {:>9} {:>11}", "epoch", "test acc", "MC mean", "MC var");
    for (&epoch, params) in &run.checkpoints {
        let s = mc_dropout_stats(params, &config.variant, &data.test_pairs, &data.test_labels, &mc)?;
        println!(
            "{epoch:>6} {:>9.4} {:>9.4} {:>11.3e}",
            run.log[epoch].test_acc, s.mean, s.variance
        );
    }
    Ok(())
}
