use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::checks::{preset_checks, CheckResult};
use super::preset::{ExperimentPreset, MetricPlan};
use super::runner::{CellOutcome, PresetOutcome, SeedRun};
use super::svg::{heatmap, histogram_chart, line_chart, LineChart, Series};
use super::table::{RunRow, SweepTable};
use crate::error::{Error, Result};
use crate::metrics::{grokking_times, GrokkingTimes, MetricPayload, MetricReport, DEFAULT_TEST_THRESHOLD, DEFAULT_TRAIN_THRESHOLD};
use crate::model::{read_checkpoint, ModelParams};
use crate::trainer::{read_log_csv, EpochRecord, RunArtifacts, TrainConfig};

/// Files produced by [`render`] plus the checks evaluated on the loaded
/// outcome.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub tables: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub checks: Vec<CheckResult>,
    pub summary: Option<PathBuf>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn need(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingFile(path))
    }
}

/// Metric records in `dir/metrics`, ordered by file name.
pub fn read_reports(dir: &Path) -> Result<Vec<MetricReport>> {
    let mdir = dir.join("metrics");
    if !mdir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&mdir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    paths.iter().map(|p| MetricReport::read(p)).collect()
}

fn read_log(dir: &Path) -> Result<Vec<EpochRecord>> {
    let log = fs::File::open(need(dir.join("log.csv"))?)?;
    let activity = dir.join("activity.csv");
    let activity = if activity.exists() {
        Some(fs::File::open(activity)?)
    } else {
        None
    };
    read_log_csv(log, activity)
}

/// A run directory without checkpoints: configuration, log, metric records.
fn load_seed_run(dir: &Path) -> Result<SeedRun> {
    let config = TrainConfig::from_json(&fs::read_to_string(need(dir.join("config.json"))?)?)?;
    let reports = read_reports(dir)?;
    if !dir.join("log.csv").exists() {
        // Training stopped on a non-finite value before writing its log.
        return Ok(SeedRun {
            seed: config.seed,
            times: GrokkingTimes::default(),
            run: None,
            diverged: Some("no log written".into()),
            reports,
            dir: Some(dir.to_path_buf()),
        });
    }
    let log = read_log(dir)?;
    let times = grokking_times(&log, DEFAULT_TRAIN_THRESHOLD, DEFAULT_TEST_THRESHOLD);
    let final_path = dir.join("final.bin");
    let final_params = if final_path.exists() {
        read_checkpoint(&final_path)?
    } else {
        ModelParams::zeros(config.dims)
    };
    Ok(SeedRun {
        seed: config.seed,
        times,
        run: Some(RunArtifacts {
            config,
            log,
            checkpoints: Default::default(),
            final_params,
            dir: Some(dir.to_path_buf()),
        }),
        diverged: None,
        reports,
        dir: Some(dir.to_path_buf()),
    })
}

/// Rebuilds a [`PresetOutcome`] from a directory written by
/// [`super::run_preset`]. Checkpoint parameters are not loaded.
pub fn load_outcome(dir: &Path) -> Result<PresetOutcome> {
    let preset: ExperimentPreset = serde_json::from_str(&fs::read_to_string(need(dir.join("preset.json"))?)?)?;
    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for cell in preset.cells() {
        let mut runs = Vec::new();
        for &seed in &preset.seeds {
            let run = load_seed_run(&dir.join(&cell.label).join(format!("seed_{seed}")))?;
            rows.push(RunRow::new(&cell.label, cell.value, seed, run.log(), &run.times, run.diverged.is_some()));
            runs.push(run);
        }
        cells.push(CellOutcome {
            label: cell.label,
            value: cell.value,
            runs,
        });
    }
    let axis = preset.sweep.as_ref().map_or("none", |a| a.name());
    Ok(PresetOutcome {
        table: SweepTable::from_runs(axis, rows),
        preset,
        cells,
        dir: Some(dir.to_path_buf()),
    })
}

/// Renders tables, plots and the check summary for a preset directory, or
/// tables and plots for a single run directory. Output depends only on the
/// files present, so re-rendering is byte-identical.
pub fn render(dir: &Path) -> Result<Report> {
    if dir.join("preset.json").exists() {
        render_preset(dir)
    } else {
        let run = load_seed_run(dir)?;
        let mut report = Report::default();
        let plan = MetricPlan {
            curves: true,
            requests: Vec::new(),
        };
        render_run(dir, &run, &plan, &mut report)?;
        Ok(report)
    }
}

fn render_preset(dir: &Path) -> Result<Report> {
    let outcome = load_outcome(dir)?;
    let mut report = Report::default();
    let plan = &outcome.preset.plan;
    for cell in &outcome.cells {
        for run in &cell.runs {
            if let Some(rdir) = &run.dir {
                render_run(rdir, run, plan, &mut report)?;
            }
        }
    }

    let path = dir.join("sweep.csv");
    outcome.table.write_csv(fs::File::create(&path)?)?;
    report.tables.push(path);
    let path = dir.join("runs.csv");
    outcome.table.write_runs_csv(fs::File::create(&path)?)?;
    report.tables.push(path);

    if !plan.is_empty() {
        let pdir = dir.join("plots");
        if outcome.cells.len() > 1 {
            let x: Vec<(f64, Option<usize>, Option<i64>)> =
                outcome.table.rows.iter().map(|r| (r.value, r.t_test, r.delay)).collect();
            let chart = LineChart {
                title: format!("{}: median grokking times", outcome.preset.name),
                x_label: outcome.table.axis.clone(),
                y_label: "epochs".into(),
                series: vec![
                    Series::new("t_test", x.iter().filter_map(|&(v, t, _)| Some((v, t? as f64))).collect()),
                    Series::new("delay", x.iter().filter_map(|&(v, _, d)| Some((v, d? as f64))).collect()).dashed(),
                ],
                y_range: None,
            };
            write_plot(&pdir, "sweep.svg", &line_chart(&chart), &mut report)?;
            let series = outcome
                .cells
                .iter()
                .filter_map(|c| {
                    let run = c.runs.first()?;
                    Some(Series::new(
                        format!("{} (seed {})", c.label, run.seed),
                        run.log().iter().map(|r| (r.epoch as f64, r.test_acc)).collect(),
                    ))
                })
                .collect();
            let chart = LineChart {
                title: format!("{}: test accuracy by cell", outcome.preset.name),
                x_label: "epoch".into(),
                y_label: "test accuracy".into(),
                series,
                y_range: Some((0.0, 1.0)),
            };
            write_plot(&pdir, "cells_test_accuracy.svg", &line_chart(&chart), &mut report)?;
        }
    }

    report.checks = preset_checks(&outcome)?;
    let path = dir.join("summary.txt");
    let mut f = fs::File::create(&path)?;
    writeln!(f, "preset {}: {}", outcome.preset.name, outcome.preset.description)?;
    for row in &outcome.table.rows {
        writeln!(
            f,
            "cell {}: t_train {}, t_test {}, delay {}, final test acc {:.4}",
            row.label,
            row.t_train.map_or("no-grok".into(), |v| v.to_string()),
            row.t_test.map_or("no-grok".into(), |v| v.to_string()),
            row.delay.map_or("no-grok".into(), |v| v.to_string()),
            row.final_test_acc
        )?;
    }
    for c in &report.checks {
        writeln!(f, "{c}")?;
    }
    report.summary = Some(path);
    Ok(report)
}

fn write_plot(dir: &Path, name: &str, svg: &str, report: &mut Report) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, svg)?;
    report.plots.push(path);
    Ok(())
}

fn write_table(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>, report: &mut Report) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    report.tables.push(path);
    Ok(())
}

fn tag(r: &MetricReport) -> String {
    let e = r.epoch.map_or("none".into(), |e| format!("{e:05}"));
    match &r.anchor {
        Some(a) => format!("{e}_{a}"),
        None => e,
    }
}

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn render_run(dir: &Path, run: &SeedRun, plan: &MetricPlan, report: &mut Report) -> Result<()> {
    let tdir = dir.join("tables");
    let pdir = dir.join("plots");
    let log = run.log();
    let reports = &run.reports;
    let epoch = |r: &MetricReport| opt_str(r.epoch);
    let anchor = |r: &MetricReport| r.anchor.clone().unwrap_or_default();

    let mut mc = Vec::new();
    let mut drc = Vec::new();
    let mut energy = Vec::new();
    let mut hist = Vec::new();
    let mut peaks = Vec::new();
    let mut sparse = Vec::new();
    for r in reports {
        match &r.payload {
            MetricPayload::McDropout { rate, passes, stats } => mc.push(vec![
                epoch(r),
                anchor(r),
                rate.to_string(),
                passes.to_string(),
                stats.mean.to_string(),
                stats.variance.to_string(),
            ]),
            MetricPayload::Drc { curve } => {
                for p in &curve.points {
                    drc.push(vec![
                        epoch(r),
                        anchor(r),
                        p.rate.to_string(),
                        p.mean_accuracy.to_string(),
                        p.variance.to_string(),
                    ]);
                }
            }
            MetricPayload::Cosine { energy: e, .. } => energy.push(vec![
                epoch(r),
                anchor(r),
                e.difference.to_string(),
                e.sum.to_string(),
                e.max().to_string(),
            ]),
            MetricPayload::Histogram { group, stats, peaks: pk } => {
                let h = &stats.histogram;
                for (k, c) in h.counts.iter().enumerate() {
                    hist.push(vec![
                        epoch(r),
                        anchor(r),
                        group.clone(),
                        k.to_string(),
                        (h.lo + k as f64 * h.width()).to_string(),
                        h.center(k).to_string(),
                        c.to_string(),
                    ]);
                }
                peaks.push(vec![
                    epoch(r),
                    anchor(r),
                    group.clone(),
                    stats.mean.to_string(),
                    stats.std.to_string(),
                    opt_str(pk.map(|p| p.0)),
                    opt_str(pk.map(|p| p.1)),
                ]);
            }
            MetricPayload::Sparsity { report: s } => sparse.push(vec![
                epoch(r),
                anchor(r),
                s.dead_fraction.to_string(),
                s.inactive_fraction.to_string(),
                s.dead_units.to_string(),
                s.examples.to_string(),
            ]),
            MetricPayload::GrokkingTimes { .. } => {}
        }
    }
    write_table(&tdir, "mc_dropout.csv", &["epoch", "anchor", "rate", "passes", "mean", "variance"], mc, report)?;
    write_table(&tdir, "drc.csv", &["epoch", "anchor", "rate", "mean_accuracy", "variance"], drc, report)?;
    write_table(&tdir, "cosine_energy.csv", &["epoch", "anchor", "difference", "sum", "max"], energy, report)?;
    write_table(&tdir, "histograms.csv", &["epoch", "anchor", "group", "bin", "bin_lo", "bin_center", "count"], hist, report)?;
    write_table(&tdir, "histogram_summary.csv", &["epoch", "anchor", "group", "mean", "std", "neg_peak", "pos_peak"], peaks, report)?;
    write_table(
        &tdir,
        "sparsity.csv",
        &["epoch", "anchor", "dead_fraction", "inactive_fraction", "dead_units", "examples"],
        sparse,
        report,
    )?;

    if plan.is_empty() {
        return Ok(());
    }
    let seed = run.seed;
    let series = |name: &str, f: fn(&EpochRecord) -> f64| Series::new(name, log.iter().map(|r| (r.epoch as f64, f(r))).collect());
    if plan.curves && !log.is_empty() {
        let chart = LineChart {
            title: format!("accuracy (seed {seed})"),
            x_label: "epoch".into(),
            y_label: "accuracy".into(),
            series: vec![series("train", |r| r.train_acc), series("test", |r| r.test_acc)],
            y_range: Some((0.0, 1.0)),
        };
        write_plot(&pdir, "accuracy.svg", &line_chart(&chart), report)?;
        let chart = LineChart {
            title: format!("parameter distributions (seed {seed})"),
            x_label: "epoch".into(),
            y_label: "value".into(),
            series: vec![
                series("embedding std", |r| r.emb_std),
                series("w1 std", |r| r.w1_std),
                series("w2 std", |r| r.w2_std),
                series("embedding mean", |r| r.emb_mean).dashed(),
                series("w1 mean", |r| r.w1_mean).dashed(),
                series("w2 mean", |r| r.w2_mean).dashed(),
            ],
            y_range: None,
        };
        write_plot(&pdir, "distribution.svg", &line_chart(&chart), report)?;
        let chart = LineChart {
            title: format!("hidden-unit sparsity (seed {seed})"),
            x_label: "epoch".into(),
            y_label: "fraction".into(),
            series: vec![series("inactive", |r| r.inactive_frac), series("dead", |r| r.dead_frac)],
            y_range: None,
        };
        write_plot(&pdir, "sparsity.svg", &line_chart(&chart), report)?;
    }

    let mc: Vec<(f64, f64, f64)> = reports
        .iter()
        .filter_map(|r| match &r.payload {
            MetricPayload::McDropout { stats, .. } => Some((r.epoch? as f64, stats.mean, stats.variance)),
            _ => None,
        })
        .collect();
    if !mc.is_empty() {
        let chart = LineChart {
            title: format!("MC-dropout accuracy variance (seed {seed})"),
            x_label: "epoch".into(),
            y_label: "variance".into(),
            series: vec![Series::new("variance", mc.iter().map(|&(e, _, v)| (e, v)).collect())],
            y_range: None,
        };
        write_plot(&pdir, "mc_variance.svg", &line_chart(&chart), report)?;
        let chart = LineChart {
            title: format!("MC-dropout mean accuracy (seed {seed})"),
            x_label: "epoch".into(),
            y_label: "accuracy".into(),
            series: vec![
                Series::new("MC mean", mc.iter().map(|&(e, m, _)| (e, m)).collect()),
                series("test (no dropout)", |r| r.test_acc).dashed(),
            ],
            y_range: Some((0.0, 1.0)),
        };
        write_plot(&pdir, "mc_mean.svg", &line_chart(&chart), report)?;
    }

    let curves: Vec<Series> = reports
        .iter()
        .filter_map(|r| match &r.payload {
            MetricPayload::Drc { curve } => Some(Series::new(
                tag(r),
                curve.points.iter().map(|p| (p.rate, p.mean_accuracy)).collect(),
            )),
            _ => None,
        })
        .collect();
    if !curves.is_empty() {
        let chart = LineChart {
            title: format!("dropout robustness (seed {seed})"),
            x_label: "dropout rate".into(),
            y_label: "mean test accuracy".into(),
            series: curves,
            y_range: Some((0.0, 1.0)),
        };
        write_plot(&pdir, "drc.svg", &line_chart(&chart), report)?;
    }

    let mut energy = Vec::new();
    for r in reports {
        if let MetricPayload::Cosine { matrix, energy: e } = &r.payload {
            if r.anchor.is_some() {
                let title = format!("embedding cosine similarity, {} (seed {seed})", tag(r));
                write_plot(&pdir, &format!("cosine_{}.svg", tag(r)), &heatmap(&title, matrix), report)?;
            } else if let Some(ep) = r.epoch {
                energy.push((ep as f64, e.difference, e.sum));
            }
        }
    }
    if energy.len() > 1 {
        let chart = LineChart {
            title: format!("codiagonal energy (seed {seed})"),
            x_label: "epoch".into(),
            y_label: "energy".into(),
            series: vec![
                Series::new("(i - j) mod P", energy.iter().map(|&(e, d, _)| (e, d)).collect()),
                Series::new("(i + j) mod P", energy.iter().map(|&(e, _, s)| (e, s)).collect()).dashed(),
            ],
            y_range: Some((0.0, 1.0)),
        };
        write_plot(&pdir, "cosine_energy.svg", &line_chart(&chart), report)?;
    }

    for r in reports {
        if let MetricPayload::Histogram { group, stats, peaks } = &r.payload {
            let title = format!("{group} values, {} (seed {seed})", tag(r));
            let svg = histogram_chart(&title, "value", &stats.histogram, *peaks);
            write_plot(&pdir, &format!("hist_{group}_{}.svg", tag(r)), &svg, report)?;
        }
    }
    Ok(())
}
