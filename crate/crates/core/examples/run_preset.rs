//! Runs a built-in preset, renders its report and prints the checks.
//!
//! ```text
//! cargo run --release --example run_preset -- <name> [out_dir] [epochs]
//! cargo run --release --example run_preset -- list
//! ```
//!
//! Presets train three seeds at full budget; pass a small `epochs` to try
//! the plumbing quickly.

use std::path::PathBuf;

use groklab::expcli::{presets, render, run_preset, RunOptions};

fn main() -> groklab::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "list".into());
    if name == "list" {
        for p in presets() {
            println!("{:<18} {}", p.name, p.description);
        }
        return Ok(());
    }
    let out = args.next().map_or_else(|| PathBuf::from("results").join(&name), PathBuf::from);
    let options = RunOptions {
        epochs: args.next().map(|s| s.parse().expect("epochs")),
        ..RunOptions::default()
    };
    run_preset(&name, Some(&out), &options)?;
    let report = render(&out)?;
    println!("{} tables, {} plots in {}", report.tables.len(), report.plots.len(), out.display());
    for c in &report.checks {
        println!("{c}");
    }
    Ok(())
}
