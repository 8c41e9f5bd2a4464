//! Grokking delay against the scale of the Xavier initialization.
//!
//! Runs one cell per scale factor and seed in parallel and prints the
//! per-cell medians.
//!
//! ```text
//! cargo run --release --example alpha_sweep -- [epochs] [seeds]
//! ```

use groklab::expcli::{run_experiment, ExperimentPreset, MetricPlan, RunOptions, SweepAxis};
use groklab::trainer::{CheckpointSchedule, TrainConfig};

fn main() -> groklab::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(4000, |s| s.parse().expect("epochs"));
    let seeds: u64 = args.next().map_or(1, |s| s.parse().expect("seeds"));

    let preset = ExperimentPreset {
        name: "alpha-sweep".into(),
        description: "delay against alpha".into(),
        base: TrainConfig {
            epochs,
            checkpoints: CheckpointSchedule::none(),
            ..TrainConfig::default()
        },
        plan: MetricPlan::default(),
        sweep: Some(SweepAxis::Alpha(vec![1.0, 3.0, 5.0, 7.0])),
        seeds: (0..seeds).collect(),
    };
    let outcome = run_experiment(&preset, None, &RunOptions::default())?;
    outcome.table.write_csv(std::io::stdout().lock())?;
    Ok(())
}
