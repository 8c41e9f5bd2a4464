//! Architectural and initialization ablations side by side: frozen
//! embeddings, ReLU after the embedding, constant embeddings and constant
//! non-embedding weights.
//!
//! ```text
//! cargo run --release --example ablations -- [epochs]
//! ```

use groklab::expcli::{run_experiment, Ablation, ExperimentPreset, MetricPlan, RunOptions, SweepAxis};
use groklab::trainer::{CheckpointSchedule, TrainConfig};

fn main() -> groklab::Result<()> {
    let epochs = std::env::args().nth(1).map_or(1500, |s| s.parse().expect("epochs"));
    let preset = ExperimentPreset {
        name: "ablations".into(),
        description: "ablations".into(),
        base: TrainConfig {
            epochs,
            checkpoints: CheckpointSchedule::none(),
            ..TrainConfig::default()
        },
        plan: MetricPlan::default(),
        sweep: Some(SweepAxis::Ablation(vec![
            Ablation::Baseline,
            Ablation::FrozenEmbedding,
            Ablation::ReluEmbedding,
            Ablation::ConstantEmbedding,
            Ablation::ConstantWeights,
        ])),
        seeds: vec![0],
    };
    let outcome = run_experiment(&preset, None, &RunOptions::default())?;
    for cell in &outcome.cells {
        let log = cell.runs[0].log();
        let best_train = log.iter().map(|r| r.train_acc).fold(0.0, f64::max);
        let best_test = log.iter().map(|r| r.test_acc).fold(0.0, f64::max);
        println!(
            "{:<20} best train {best_train:.3}  best test {best_test:.3}  t_train {:?}  t_test {:?}",
            cell.label, cell.runs[0].times.t_train, cell.runs[0].times.t_test
        );
    }
    Ok(())
}
