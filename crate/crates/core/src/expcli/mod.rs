//! Experiment presets, sweeps, acceptance checks and SVG reports.
//!
//! A preset names a base configuration, an optional sweep axis, a metric
//! plan and a seed list. [`run_preset`] trains every (cell, seed) pair and
//! persists logs, checkpoints and metric records; [`render`] turns a results
//! directory back into CSV tables, SVG plots and a pass/fail summary using
//! only what is on disk.

mod anchor;
pub mod checks;
pub mod cli;
mod preset;
mod render;
mod runner;
pub mod svg;
mod table;

pub use anchor::{Anchor, MID_RISE_ACC, RISE_ONSET_ACC};
pub use preset::{
    find_preset, preset_names, presets, Ablation, Cell, Checkpoints, ExperimentPreset, HistTarget, MetricKind,
    MetricPlan, MetricRequest, ShiftTarget, SweepAxis, ALPHAS, BASELINE_EPOCHS, CONSTANT_EMBEDDING, CONSTANT_WEIGHTS,
    DEFAULT_SEEDS, DENSE_EVERY, INIT_INTERVALS, SHIFTED_NORMAL, WEIGHT_DECAYS,
};
pub use render::{load_outcome, read_reports, render, Report};
pub use runner::{
    evaluate_plan, report_file_name, run_cell, run_experiment, run_preset, CellOutcome, PresetOutcome, RunOptions,
    SeedRun,
};
pub use table::{median, median_opt, sparsity_min_epoch, RunRow, SweepRow, SweepTable, NO_GROK};
