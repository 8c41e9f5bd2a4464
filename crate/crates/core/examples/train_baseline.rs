//! Trains the default configuration and reports when it memorized and when
//! it generalized.
//!
//! ```text
//! cargo run --release --example train_baseline -- [epochs] [out_dir]
//! ```
//!
//! The default budget of 2500 epochs is enough for the test accuracy to
//! rise; pass a smaller number for a quick look at the memorization phase.

use std::path::PathBuf;

use groklab::metrics::{grokking_times, DEFAULT_TEST_THRESHOLD, DEFAULT_TRAIN_THRESHOLD};
use groklab::trainer::{train_with, TrainConfig};

fn main() -> groklab::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(2500, |s| s.parse().expect("epochs must be an integer"));
    let out = args.next().map(PathBuf::from);

    let config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    println!("config hash {}", config.hash());
    let run = train_with(&config, out.as_deref(), |r| {
        if r.epoch % 100 == 0 {
            println!(
                "epoch {:>5}  loss {:.4}  train {:.3}  test {:.3}",
                r.epoch, r.train_loss, r.train_acc, r.test_acc
            );
        }
    })?;

    let t = grokking_times(&run.log, DEFAULT_TRAIN_THRESHOLD, DEFAULT_TEST_THRESHOLD);
    println!("t_train {:?}  t_test {:?}  delay {:?}", t.t_train, t.t_test, t.delay);
    if let Some(dir) = out {
        println!("artifacts in {}", dir.display());
    }
    Ok(())
}
