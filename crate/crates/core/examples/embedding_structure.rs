//! Cosine similarity between token embeddings and its codiagonal bands.
//!
//! Writes one heatmap per checkpoint to `target/embedding_structure/` and
//! prints the codiagonal energy, which is near zero for random embeddings
//! and approaches one as the bands `(i - j) mod P` emerge.
//!
//! ```text
//! cargo run --release --example embedding_structure -- [epochs]
//! ```

use std::fs;
use std::path::Path;

use groklab::expcli::svg::heatmap;
use groklab::metrics::{codiagonal_energy, cosine_similarity_matrix};
use groklab::trainer::{train, CheckpointSchedule, TrainConfig};

fn main() -> groklab::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("epochs"));
    let config = TrainConfig {
        epochs,
        checkpoints: CheckpointSchedule::every((epochs / 4).max(1)),
        ..TrainConfig::default()
    };
    let run = train(&config, None)?;
    let out = Path::new("target/embedding_structure");
    fs::create_dir_all(out)?;

    for (&epoch, params) in &run.checkpoints {
        let c = cosine_similarity_matrix(&params.embedding)?;
        let e = codiagonal_energy(&c)?;
        println!(
            "epoch {epoch:>5}: energy (i-j) {:.3}  (i+j) {:.3}  test acc {:.3}",
            e.difference, e.sum, run.log[epoch].test_acc
        );
        let rows: Vec<Vec<f64>> = (0..c.rows()).map(|r| c.row(r).to_vec()).collect();
        fs::write(out.join(format!("cosine_{epoch:05}.svg")), heatmap(&format!("epoch {epoch}"), &rows))?;
    }
    println!("heatmaps in {}", out.display());
    Ok(())
}
