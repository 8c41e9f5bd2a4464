//! Fraction of silent ReLU units over training, for several weight-decay
//! strengths.
//!
//! The per-example inactive fraction drops quickly, bottoms out, then climbs
//! again; stronger decay reaches the minimum sooner.
//!
//! ```text
//! cargo run --release --example sparsity_trajectory -- [epochs]
//! ```

use groklab::expcli::sparsity_min_epoch;
use groklab::optimizer::OptHyper;
use groklab::trainer::{train, CheckpointSchedule, TrainConfig};

fn main() -> groklab::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(400, |s| s.parse().expect("epochs"));
    for weight_decay in [0.3, 1.0, 3.0] {
        let config = TrainConfig {
            epochs,
            optimizer: OptHyper {
                weight_decay,
                ..OptHyper::default()
            },
            checkpoints: CheckpointSchedule::none(),
            ..TrainConfig::default()
        };
        let run = train(&config, None)?;
        let at = |e: usize| run.log[e.min(epochs)].inactive_frac;
        println!(
            "weight decay {weight_decay}: inactive at 0 {:.4}, minimum at epoch {:?}, final {:.4}, dead units {:.3}",
            at(0),
            sparsity_min_epoch(&run.log),
            at(epochs),
            run.log[epochs].dead_frac
        );
    }
    Ok(())
}
