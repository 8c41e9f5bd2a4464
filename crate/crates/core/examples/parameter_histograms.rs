//! Parameter distributions before and after grokking.
//!
//! After generalization the embedding entries split into two symmetric
//! modes near ±0.4; `detect_bimodality` locates them.
//!
//! ```text
//! cargo run --release --example parameter_histograms -- [epochs]
//! ```

use groklab::metrics::{detect_bimodality, distribution_stats};
use groklab::trainer::{train, CheckpointSchedule, TrainConfig};

fn main() -> groklab::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(2500, |s| s.parse().expect("epochs"));
    let config = TrainConfig {
        epochs,
        checkpoints: CheckpointSchedule {
            epochs: vec![0, epochs],
            every: None,
        },
        ..TrainConfig::default()
    };
    let run = train(&config, None)?;
    for (&epoch, p) in &run.checkpoints {
        for (name, m) in [("embedding", &p.embedding), ("w1", &p.w1), ("w2", &p.w2)] {
            let s = distribution_stats(m.data())?;
            let peaks = detect_bimodality(&s.histogram)
                .map_or("unimodal".to_string(), |(a, b)| format!("peaks at {a:+.3} / {b:+.3}"));
            println!("epoch {epoch:>5} {name:<9} mean {:+.4} std {:.4}  {peaks}", s.mean, s.std);
        }
    }
    Ok(())
}
