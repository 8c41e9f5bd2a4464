use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::preset::{find_preset, Checkpoints, ExperimentPreset, HistTarget, MetricKind, MetricPlan};
use super::table::{RunRow, SweepTable};
use crate::error::{Error, Result};
use crate::metrics::{
    codiagonal_energy, cosine_similarity_matrix, detect_bimodality, distribution_stats, dropout_robustness_curve,
    grokking_times, mc_dropout_stats, sparsity, GrokkingTimes, McDropoutConfig, MetricPayload, MetricReport,
    DEFAULT_TEST_THRESHOLD, DEFAULT_TRAIN_THRESHOLD,
};
use crate::model::{DropoutPlacement, ModelParams};
use crate::numerics::Matrix;
use crate::trainer::{train, Data, RunArtifacts, TrainConfig};

/// Overrides applied on top of a preset.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
    /// Keep checkpoint parameters in memory after metrics are computed.
    pub keep_checkpoints: bool,
    /// Stop each run once it has grokked; see `TrainConfig::stop_when_grokked`.
    pub stop_when_grokked: bool,
}

impl RunOptions {
    /// Three consecutive seeds starting at `master`.
    pub fn from_master_seed(master: u64) -> Self {
        Self {
            seeds: Some((master..master + 3).collect()),
            ..Self::default()
        }
    }
}

/// One trained (cell, seed) pair.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub times: GrokkingTimes,
    /// `None` when training diverged.
    pub run: Option<RunArtifacts>,
    pub diverged: Option<String>,
    pub reports: Vec<MetricReport>,
    pub dir: Option<PathBuf>,
}

impl SeedRun {
    pub fn log(&self) -> &[crate::trainer::EpochRecord] {
        self.run.as_ref().map_or(&[], |r| &r.log)
    }

    /// Reports of one metric kind, in checkpoint order.
    pub fn reports_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a MetricReport> + 'a {
        self.reports.iter().filter(move |r| r.payload.name() == name)
    }

    /// The report selected by `anchor` for the metric `name`.
    pub fn anchored(&self, name: &str, anchor: &str) -> Option<&MetricReport> {
        self.reports
            .iter()
            .find(|r| r.payload.name() == name && r.anchor.as_deref() == Some(anchor))
    }
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub label: String,
    pub value: f64,
    pub runs: Vec<SeedRun>,
}

#[derive(Clone, Debug)]
pub struct PresetOutcome {
    pub preset: ExperimentPreset,
    pub cells: Vec<CellOutcome>,
    pub table: SweepTable,
    pub dir: Option<PathBuf>,
}

impl PresetOutcome {
    pub fn cell(&self, label: &str) -> Option<&CellOutcome> {
        self.cells.iter().find(|c| c.label == label)
    }
}

/// Runs a built-in preset by name, persisting under `out` when given.
pub fn run_preset(name: &str, out: Option<&Path>, options: &RunOptions) -> Result<PresetOutcome> {
    run_experiment(&find_preset(name)?, out, options)
}

/// Trains every (cell, seed) pair of `preset`, computes its metric plan,
/// and writes everything under `out`. Cells run in parallel; each is fully
/// determined by its configuration, so the output does not depend on
/// scheduling.
pub fn run_experiment(preset: &ExperimentPreset, out: Option<&Path>, options: &RunOptions) -> Result<PresetOutcome> {
    let mut preset = preset.clone();
    if let Some(seeds) = &options.seeds {
        preset.seeds = seeds.clone();
    }
    if let Some(epochs) = options.epochs {
        preset.base.epochs = epochs;
    }
    preset.base.stop_when_grokked |= options.stop_when_grokked;
    preset.validate()?;
    let cells = preset.cells();

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("preset.json"), serde_json::to_string_pretty(&preset)?)?;
    }

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| preset.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let runs: Vec<SeedRun> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cell = &cells[c];
            let config = TrainConfig {
                seed,
                ..cell.config.clone()
            };
            let dir = out.map(|d| d.join(&cell.label).join(format!("seed_{seed}")));
            run_cell(&config, &preset.plan, dir.as_deref(), options.keep_checkpoints)
        })
        .collect::<Result<_>>()?;

    let mut runs = runs.into_iter();
    let mut outcomes = Vec::with_capacity(cells.len());
    let mut rows = Vec::with_capacity(jobs.len());
    for cell in &cells {
        let seeds: Vec<SeedRun> = runs.by_ref().take(preset.seeds.len()).collect();
        for r in &seeds {
            rows.push(RunRow::new(&cell.label, cell.value, r.seed, r.log(), &r.times, r.diverged.is_some()));
        }
        outcomes.push(CellOutcome {
            label: cell.label.clone(),
            value: cell.value,
            runs: seeds,
        });
    }
    let axis = preset.sweep.as_ref().map_or("none", |a| a.name());
    let table = SweepTable::from_runs(axis, rows);
    if let Some(dir) = out {
        table.write_csv(fs::File::create(dir.join("sweep.csv"))?)?;
        table.write_runs_csv(fs::File::create(dir.join("runs.csv"))?)?;
    }
    Ok(PresetOutcome {
        preset,
        cells: outcomes,
        table,
        dir: out.map(Path::to_path_buf),
    })
}

/// Trains one configuration and evaluates `plan` on its checkpoints. A run
/// that hits a non-finite value is reported as diverged instead of failing
/// the whole experiment.
pub fn run_cell(config: &TrainConfig, plan: &MetricPlan, dir: Option<&Path>, keep_checkpoints: bool) -> Result<SeedRun> {
    let mut run = match train(config, dir) {
        Ok(run) => run,
        Err(e @ (Error::NonFinite { .. } | Error::NonFiniteResult(_) | Error::PoisonedGradient { .. })) => {
            return Ok(SeedRun {
                seed: config.seed,
                times: GrokkingTimes::default(),
                run: None,
                diverged: Some(e.to_string()),
                reports: Vec::new(),
                dir: dir.map(Path::to_path_buf),
            })
        }
        Err(e) => return Err(e),
    };
    let times = grokking_times(&run.log, DEFAULT_TRAIN_THRESHOLD, DEFAULT_TEST_THRESHOLD);
    let reports = evaluate_plan(plan, &run, &times)?;
    if let Some(dir) = dir {
        let mdir = dir.join("metrics");
        if !reports.is_empty() {
            fs::create_dir_all(&mdir)?;
        }
        for r in &reports {
            r.write(&mdir.join(report_file_name(r)))?;
        }
    }
    if !keep_checkpoints {
        run.checkpoints.clear();
    }
    Ok(SeedRun {
        seed: config.seed,
        times,
        run: Some(run),
        diverged: None,
        reports,
        dir: dir.map(Path::to_path_buf),
    })
}

pub fn report_file_name(r: &MetricReport) -> String {
    let mut name = r.payload.name().to_string();
    if let MetricPayload::Histogram { group, .. } = &r.payload {
        name = format!("{name}_{group}");
    }
    if let Some(e) = r.epoch {
        name = format!("{name}_{e:05}");
    }
    if let Some(a) = &r.anchor {
        name = format!("{name}_{a}");
    }
    name + ".json"
}

/// Checkpoints chosen by a request, as `(epoch, anchor label)`.
fn select(at: &Checkpoints, run: &RunArtifacts, times: &GrokkingTimes) -> Vec<(usize, Option<String>)> {
    match at {
        Checkpoints::All => run.checkpoints.keys().map(|&e| (e, None)).collect(),
        Checkpoints::Anchors(list) => list
            .iter()
            .filter_map(|a| {
                let target = a.resolve(&run.log, times)?;
                let (epoch, _) = run.nearest_checkpoint(target)?;
                Some((epoch, Some(a.label())))
            })
            .collect(),
    }
}

fn hist_values(target: HistTarget, p: &ModelParams, relu: bool) -> Matrix {
    match target {
        HistTarget::Embedding => p.embedding.clone(),
        HistTarget::EmbeddingOutput => {
            let mut e = p.embedding.clone();
            if relu {
                e.map_inplace(|x| x.max(0.0));
            }
            e
        }
        HistTarget::W1 => p.w1.clone(),
        HistTarget::W2 => p.w2.clone(),
    }
}

/// Computes every request of `plan` on the in-memory checkpoints of `run`.
pub fn evaluate_plan(plan: &MetricPlan, run: &RunArtifacts, times: &GrokkingTimes) -> Result<Vec<MetricReport>> {
    if plan.requests.is_empty() {
        return Ok(Vec::new());
    }
    let config = &run.config;
    let data = Data::for_config(config)?;
    let (all_pairs, _) = data.all_pairs();
    let variant = config.variant;
    let hash = config.hash();
    let mut reports = Vec::new();
    for req in &plan.requests {
        for (epoch, anchor) in select(&req.at, run, times) {
            let params = &run.checkpoints[&epoch];
            let payload = match &req.metric {
                MetricKind::McDropout { rate, passes } => {
                    let cfg = McDropoutConfig {
                        rate: *rate,
                        passes: *passes,
                        seed: config.seed,
                        placement: DropoutPlacement::Hidden,
                    };
                    MetricPayload::McDropout {
                        rate: *rate,
                        passes: *passes,
                        stats: mc_dropout_stats(params, &variant, &data.test_pairs, &data.test_labels, &cfg)?,
                    }
                }
                MetricKind::Drc { rates, passes } => {
                    let mut curve = dropout_robustness_curve(
                        params,
                        &variant,
                        &data.test_pairs,
                        &data.test_labels,
                        rates,
                        *passes,
                        config.seed,
                    )?;
                    curve.epoch = Some(epoch);
                    MetricPayload::Drc { curve }
                }
                MetricKind::Cosine => {
                    let c = cosine_similarity_matrix(&params.embedding)?;
                    let energy = codiagonal_energy(&c)?;
                    MetricPayload::Cosine {
                        matrix: (0..c.rows()).map(|r| c.row(r).to_vec()).collect(),
                        energy,
                    }
                }
                MetricKind::Histogram { target } => {
                    let values = hist_values(*target, params, variant.relu_after_embedding);
                    let stats = distribution_stats(values.data())?;
                    let peaks = detect_bimodality(&stats.histogram);
                    MetricPayload::Histogram {
                        group: target.label().into(),
                        stats,
                        peaks,
                    }
                }
                MetricKind::Sparsity => MetricPayload::Sparsity {
                    report: sparsity(params, &variant, &all_pairs)?,
                },
            };
            reports.push(MetricReport {
                config_hash: hash.clone(),
                seed: config.seed,
                epoch: Some(epoch),
                anchor,
                payload,
            });
        }
    }
    Ok(reports)
}
