use std::fs;
use std::path::Path;

use groklab::expcli::{
    render, run_cell, run_experiment, Ablation, Anchor, Checkpoints, ExperimentPreset, HistTarget, MetricKind,
    MetricPlan, MetricRequest, RunOptions, SweepAxis,
};
use groklab::model::ModelDims;
use groklab::optimizer::OptHyper;
use groklab::trainer::{CheckpointSchedule, TrainConfig};
use groklab::Error;

fn tiny(epochs: usize) -> TrainConfig {
    TrainConfig {
        dims: ModelDims {
            modulus: 7,
            embed_dim: 6,
            hidden: 12,
        },
        epochs,
        checkpoints: CheckpointSchedule::every(4),
        ..TrainConfig::default()
    }
}

fn full_plan() -> MetricPlan {
    let at = |a: &[Anchor]| Checkpoints::Anchors(a.to_vec());
    MetricPlan {
        curves: true,
        requests: vec![
            MetricRequest {
                metric: MetricKind::McDropout { rate: 0.3, passes: 5 },
                at: Checkpoints::All,
            },
            MetricRequest {
                metric: MetricKind::Drc {
                    rates: vec![0.0, 0.5],
                    passes: 3,
                },
                at: at(&[Anchor::Init, Anchor::Final]),
            },
            MetricRequest {
                metric: MetricKind::Cosine,
                at: at(&[Anchor::Init, Anchor::Final]),
            },
            MetricRequest {
                metric: MetricKind::Cosine,
                at: Checkpoints::All,
            },
            MetricRequest {
                metric: MetricKind::Histogram {
                    target: HistTarget::Embedding,
                },
                at: at(&[Anchor::Final]),
            },
            MetricRequest {
                metric: MetricKind::Sparsity,
                at: at(&[Anchor::Final]),
            },
        ],
    }
}

fn preset(plan: MetricPlan, sweep: Option<SweepAxis>) -> ExperimentPreset {
    ExperimentPreset {
        name: "tiny".into(),
        description: "tiny".into(),
        base: tiny(12),
        plan,
        sweep,
        seeds: vec![0, 1],
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn preset_reruns_and_renders_identically() {
    let p = preset(full_plan(), Some(SweepAxis::WeightDecay(vec![0.5, 1.0])));
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&p, Some(a.path()), &RunOptions::default()).unwrap();
    run_experiment(&p, Some(b.path()), &RunOptions::default()).unwrap();
    let first = render(a.path()).unwrap();
    render(b.path()).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
    assert!(!first.plots.is_empty());
    assert!(first.plots.iter().any(|p| p.ends_with("sweep.svg")));
    assert!(first.plots.iter().any(|p| p.to_string_lossy().contains("cosine_00000_init")));

    let before = files(a.path());
    let again = render(a.path()).unwrap();
    assert_eq!(before, files(a.path()));
    assert_eq!(first, again);
}

#[test]
fn empty_plan_renders_tables_only() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&preset(MetricPlan::default(), None), Some(dir.path()), &RunOptions::default()).unwrap();
    let report = render(dir.path()).unwrap();
    assert!(report.plots.is_empty());
    assert!(report.tables.iter().any(|t| t.ends_with("sweep.csv")));
    assert!(report.checks.is_empty());
}

#[test]
fn render_names_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    match render(dir.path()) {
        Err(Error::MissingFile(p)) => assert!(p.ends_with("config.json")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn diverged_runs_are_recorded_not_fatal() {
    let mut config = tiny(5);
    config.optimizer = OptHyper {
        lr: 1e300,
        ..OptHyper::default()
    };
    let run = run_cell(&config, &MetricPlan::default(), None, false).unwrap();
    assert!(run.diverged.is_some());
    assert!(run.times.t_test.is_none());

    let mut p = preset(MetricPlan::default(), Some(SweepAxis::Ablation(vec![Ablation::Baseline])));
    p.base = config;
    let outcome = run_experiment(&p, None, &RunOptions::default()).unwrap();
    assert!(outcome.table.runs.iter().all(|r| r.diverged));
    let mut buf = Vec::new();
    outcome.table.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().contains("no-grok"));
}

#[test]
fn metrics_land_on_resolved_checkpoints() {
    let p = preset(full_plan(), None);
    let outcome = run_experiment(&p, None, &RunOptions::default()).unwrap();
    let run = &outcome.cells[0].runs[0];
    assert_eq!(run.reports_named("mc_dropout").count(), 4);
    assert_eq!(run.anchored("cosine", "init").unwrap().epoch, Some(0));
    assert_eq!(run.anchored("drc", "final").unwrap().epoch, Some(12));
    assert!(run.run.as_ref().unwrap().checkpoints.is_empty());
}
