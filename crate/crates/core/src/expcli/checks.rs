//! Qualitative checks on preset outcomes.
//!
//! Quantities compared against a threshold are reduced to their median over
//! seeds first; structural per-run properties (where a peak lies, how a
//! trajectory bends) must hold for a majority of seeds, which is the
//! median of the per-seed pass/fail outcomes.

use std::fmt;

use super::runner::{CellOutcome, PresetOutcome, SeedRun};
use super::table::{median, median_opt, SweepTable};
use crate::error::Result;
use crate::metrics::{null_codiagonal_energies, Histogram, MetricPayload, MetricReport};
use crate::model::{InitSpec, ModelDims};

pub const MIN_DELAY: i64 = 100;
/// The variance peak may sit at most this fraction of `t_test` past it.
pub const PEAK_WINDOW_SLACK: f64 = 0.1;
pub const FINAL_VARIANCE_RATIO: f64 = 0.1;
pub const PRE_RISE_MAX_ACC: f64 = 0.1;
pub const DRC_LOW_RATE_RETENTION: f64 = 0.9;
pub const DRC_HIGH_RATE_RETENTION: f64 = 0.7;
pub const INIT_ENERGY_MAX: f64 = 0.05;
pub const POST_GROK_ENERGY_FACTOR: f64 = 5.0;
pub const FROZEN_ENERGY_FACTOR: f64 = 2.0;
pub const NULL_SAMPLES: u64 = 100;
pub const PEAK_LOCATION: f64 = 0.4;
pub const PEAK_TOLERANCE: f64 = 0.15;
pub const PEAK_ASYMMETRY: f64 = 0.1;
pub const FROZEN_MAX_TEST_ACC: f64 = 0.5;
pub const SEPARATION_TOLERANCE: f64 = 0.2;
pub const SHIFTED_MEAN_MAX: f64 = 0.05;
pub const RISING_TRAIN_ACC: f64 = 0.5;
pub const CONSTANT_WEIGHTS_MAX_TRAIN_ACC: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.id, self.detail)
    }
}

fn result(id: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { id, passed, detail }
}

fn majority(oks: &[bool]) -> bool {
    2 * oks.iter().filter(|&&b| b).count() > oks.len()
}

fn tally(oks: &[bool]) -> String {
    format!("{}/{} seeds", oks.iter().filter(|&&b| b).count(), oks.len())
}

fn fmt_opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "never".into(), |x| x.to_string())
}

/// Mean codiagonal energy of untrained embedding tables.
pub fn null_energy_baseline(dims: ModelDims, init: &InitSpec) -> Result<f64> {
    let e = null_codiagonal_energies(dims, init, 0..NULL_SAMPLES)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

fn energy(r: &MetricReport) -> Option<f64> {
    match &r.payload {
        MetricPayload::Cosine { energy, .. } => Some(energy.max()),
        _ => None,
    }
}

fn peaks(r: &MetricReport) -> Option<(f64, f64)> {
    match &r.payload {
        MetricPayload::Histogram { peaks, .. } => *peaks,
        _ => None,
    }
}

fn histogram(r: &MetricReport) -> Option<&Histogram> {
    match &r.payload {
        MetricPayload::Histogram { stats, .. } => Some(&stats.histogram),
        _ => None,
    }
}

/// Train accuracy reaches its threshold, and test accuracy reaches its own
/// at least [`MIN_DELAY`] epochs later.
pub fn grokking_exists(cell: &CellOutcome) -> CheckResult {
    let t_train = median_opt(&cell.runs.iter().map(|r| r.times.t_train).collect::<Vec<_>>());
    let t_test = median_opt(&cell.runs.iter().map(|r| r.times.t_test).collect::<Vec<_>>());
    let delay = median_opt(&cell.runs.iter().map(|r| r.times.delay).collect::<Vec<_>>());
    let passed = t_train.is_some() && t_test.is_some() && delay.is_some_and(|d| d >= MIN_DELAY);
    result(
        "grokking",
        passed,
        format!(
            "median t_train {}, t_test {}, delay {} (need >= {MIN_DELAY})",
            fmt_opt(t_train),
            fmt_opt(t_test),
            fmt_opt(delay)
        ),
    )
}

/// Per-checkpoint MC-dropout variances of one run, in epoch order.
fn variance_series(run: &SeedRun) -> Vec<(usize, f64)> {
    run.reports_named("mc_dropout")
        .filter_map(|r| match &r.payload {
            MetricPayload::McDropout { stats, .. } => Some((r.epoch?, stats.variance)),
            _ => None,
        })
        .collect()
}

/// The MC-dropout variance peaks strictly inside
/// `(t_train, t_test * (1 + slack))` and has collapsed by the last
/// checkpoint.
pub fn variance_spike(cell: &CellOutcome) -> CheckResult {
    let mut oks = Vec::new();
    let mut notes = Vec::new();
    for run in &cell.runs {
        let series = variance_series(run);
        let peak = series.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1));
        let ok = match (peak, series.last(), run.times.t_train, run.times.t_test) {
            (Some((pe, pv)), Some(&(_, last)), Some(tr), Some(te)) => {
                let hi = te as f64 * (1.0 + PEAK_WINDOW_SLACK);
                notes.push(format!("seed {}: peak {pe} in ({tr}, {hi:.0}), final/peak {:.3}", run.seed, last / pv));
                pe > tr && (pe as f64) < hi && last < FINAL_VARIANCE_RATIO * pv
            }
            _ => {
                notes.push(format!("seed {}: missing variance series or times", run.seed));
                false
            }
        };
        oks.push(ok);
    }
    result("variance_spike", majority(&oks), format!("{}; {}", tally(&oks), notes.join("; ")))
}

/// Before the rise every dropout rate gives near-chance accuracy; after
/// grokking small rates barely matter and large ones do.
pub fn drc_ordering(cell: &CellOutcome) -> CheckResult {
    let curve = |run: &SeedRun, anchor: &str| {
        run.anchored("drc", anchor).and_then(|r| match &r.payload {
            MetricPayload::Drc { curve } => Some(curve.clone()),
            _ => None,
        })
    };
    let mut pre_max = Vec::new();
    let mut keep_02 = Vec::new();
    let mut keep_07 = Vec::new();
    for run in &cell.runs {
        if let Some(c) = curve(run, "pre_rise") {
            pre_max.push(c.points.iter().map(|p| p.mean_accuracy).fold(0.0, f64::max));
        }
        if let Some(c) = curve(run, "post_grok") {
            if let (Some(a0), Some(a2), Some(a7)) = (c.accuracy_at(0.0), c.accuracy_at(0.2), c.accuracy_at(0.7)) {
                keep_02.push(a2 / a0);
                keep_07.push(a7 / a0);
            }
        }
    }
    let n = cell.runs.len();
    if pre_max.len() * 2 <= n || keep_02.len() * 2 <= n {
        return result("drc_ordering", false, "pre-rise or post-grok curves missing".into());
    }
    let (pre, r2, r7) = (median(&pre_max), median(&keep_02), median(&keep_07));
    result(
        "drc_ordering",
        pre <= PRE_RISE_MAX_ACC && r2 >= DRC_LOW_RATE_RETENTION && r7 <= DRC_HIGH_RATE_RETENTION,
        format!(
            "median pre-rise max acc {pre:.4} (<= {PRE_RISE_MAX_ACC}); post-grok acc(0.2)/acc(0) {r2:.3} \
             (>= {DRC_LOW_RATE_RETENTION}), acc(0.7)/acc(0) {r7:.3} (<= {DRC_HIGH_RATE_RETENTION})"
        ),
    )
}

/// Codiagonal energy starts at the null level and grows through training.
pub fn cosine_structure(cell: &CellOutcome, null: f64) -> CheckResult {
    let at = |anchor: &str| {
        let v: Vec<f64> = cell
            .runs
            .iter()
            .filter_map(|r| r.anchored("cosine", anchor).and_then(energy))
            .collect();
        (v.len() * 2 > cell.runs.len()).then(|| median(&v))
    };
    match (at("init"), at("t_train"), at("post_grok")) {
        (Some(e0), Some(e1), Some(e2)) => result(
            "cosine_structure",
            e0 < INIT_ENERGY_MAX && e1 > e0 && e2 > e1 && e2 >= POST_GROK_ENERGY_FACTOR * null,
            format!(
                "median energy init {e0:.4} (< {INIT_ENERGY_MAX}), t_train {e1:.4}, post-grok {e2:.4} \
                 (>= {POST_GROK_ENERGY_FACTOR} x null {null:.4})"
            ),
        ),
        _ => result("cosine_structure", false, "anchored cosine reports missing".into()),
    }
}

/// Post-grok embedding values split into two symmetric modes near ±0.4.
pub fn bimodal_embeddings(cell: &CellOutcome) -> CheckResult {
    let found: Vec<(f64, f64)> = cell
        .runs
        .iter()
        .filter_map(|r| {
            r.reports_named("histogram")
                .find(|h| h.anchor.as_deref() == Some("post_grok") && matches!(&h.payload, MetricPayload::Histogram { group, .. } if group == "embedding"))
                .and_then(peaks)
        })
        .collect();
    if found.len() * 2 <= cell.runs.len() {
        return result("bimodal_embeddings", false, format!("peaks found for {}/{} seeds", found.len(), cell.runs.len()));
    }
    let neg = median(&found.iter().map(|p| p.0).collect::<Vec<_>>());
    let pos = median(&found.iter().map(|p| p.1).collect::<Vec<_>>());
    result(
        "bimodal_embeddings",
        (neg + PEAK_LOCATION).abs() <= PEAK_TOLERANCE
            && (pos - PEAK_LOCATION).abs() <= PEAK_TOLERANCE
            && (neg + pos).abs() <= PEAK_ASYMMETRY,
        format!(
            "median peaks {neg:.3} / {pos:.3} (want ±{PEAK_LOCATION} ± {PEAK_TOLERANCE}, |sum| <= {PEAK_ASYMMETRY})"
        ),
    )
}

/// The inactive fraction first falls, bottoms out before `t_test`, and
/// climbs again past its level at `t_train`.
pub fn sparsity_trajectory(cell: &CellOutcome) -> CheckResult {
    let mut oks = Vec::new();
    let mut notes = Vec::new();
    for run in &cell.runs {
        let log = run.log();
        let (Some(tr), Some(te), Some(first), Some(last)) = (run.times.t_train, run.times.t_test, log.first(), log.last()) else {
            oks.push(false);
            notes.push(format!("seed {}: did not grok", run.seed));
            continue;
        };
        let min = log
            .iter()
            .min_by(|a, b| a.inactive_frac.total_cmp(&b.inactive_frac))
            .expect("non-empty log");
        let at_tr = log[tr].inactive_frac;
        oks.push(min.inactive_frac < first.inactive_frac && min.epoch < te && last.inactive_frac > at_tr);
        notes.push(format!(
            "seed {}: start {:.4}, min {:.4} at {} (t_test {te}), t_train {:.4}, final {:.4}",
            run.seed, first.inactive_frac, min.inactive_frac, min.epoch, at_tr, last.inactive_frac
        ));
    }
    result("sparsity_trajectory", majority(&oks), format!("{}; {}", tally(&oks), notes.join("; ")))
}

fn strictly<T: PartialOrd + Copy>(v: &[Option<T>], increasing: bool) -> bool {
    v.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => {
            if increasing {
                a < b
            } else {
                a > b
            }
        }
        _ => false,
    })
}

/// Median delay grows strictly with the Xavier scale.
pub fn alpha_scaling(table: &SweepTable) -> CheckResult {
    let delays: Vec<Option<i64>> = table.rows.iter().map(|r| r.delay).collect();
    result(
        "alpha_scaling",
        table.rows.len() >= 2 && strictly(&delays, true),
        format!(
            "median delay by alpha: {}",
            table
                .rows
                .iter()
                .map(|r| format!("{} -> {}", r.value, fmt_opt(r.delay)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

/// The sparsity minimum arrives strictly earlier as weight decay grows.
pub fn decay_sparsity(table: &SweepTable) -> CheckResult {
    let epochs: Vec<Option<usize>> = table.rows.iter().map(|r| r.sparsity_min_epoch).collect();
    result(
        "decay_sparsity",
        table.rows.len() >= 2 && strictly(&epochs, false),
        format!(
            "median sparsity-minimum epoch by weight decay: {}",
            table
                .rows
                .iter()
                .map(|r| format!("{} -> {}", r.value, fmt_opt(r.sparsity_min_epoch)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

/// Frozen embeddings never generalize, never acquire band structure and
/// stay unimodal.
pub fn frozen_embedding(cell: &CellOutcome, null: f64) -> CheckResult {
    let mut oks = Vec::new();
    let mut notes = Vec::new();
    for run in &cell.runs {
        let max_test = run.log().iter().map(|r| r.test_acc).fold(0.0, f64::max);
        let max_energy = run.reports_named("cosine").filter_map(energy).fold(0.0, f64::max);
        let unimodal = run
            .anchored("histogram", "final")
            .is_some_and(|h| peaks(h).is_none());
        oks.push(!run.log().is_empty() && max_test < FROZEN_MAX_TEST_ACC && max_energy < FROZEN_ENERGY_FACTOR * null && unimodal);
        notes.push(format!(
            "seed {}: max test acc {max_test:.3}, max energy {max_energy:.4}, unimodal {unimodal}",
            run.seed
        ));
    }
    result(
        "frozen_embedding",
        majority(&oks),
        format!(
            "{}; need test < {FROZEN_MAX_TEST_ACC}, energy < {:.4}; {}",
            tally(&oks),
            FROZEN_ENERGY_FACTOR * null,
            notes.join("; ")
        ),
    )
}

/// ReLU after the embedding: what the network sees is non-negative, the
/// raw table is still bimodal with the baseline's peak separation, and
/// grokking comes later.
pub fn relu_embedding(baseline: &CellOutcome, relu: &CellOutcome) -> CheckResult {
    let separation = |cell: &CellOutcome| {
        let v: Vec<f64> = cell
            .runs
            .iter()
            .filter_map(|r| {
                r.reports_named("histogram")
                    .find(|h| {
                        h.anchor.as_deref() == Some("post_grok")
                            && matches!(&h.payload, MetricPayload::Histogram { group, .. } if group == "embedding")
                    })
                    .and_then(peaks)
                    .map(|(n, p)| p - n)
            })
            .collect();
        (v.len() * 2 > cell.runs.len()).then(|| median(&v))
    };
    let non_negative: Vec<bool> = relu
        .runs
        .iter()
        .map(|r| {
            r.reports_named("histogram")
                .find(|h| matches!(&h.payload, MetricPayload::Histogram { group, .. } if group == "embedding_output"))
                .and_then(histogram)
                .is_some_and(|h| (0..h.bins()).all(|k| h.lo + (k + 1) as f64 * h.width() > 0.0 || h.counts[k] == 0))
        })
        .collect();
    let t_base = median_opt(&baseline.runs.iter().map(|r| r.times.t_test).collect::<Vec<_>>());
    let t_relu = median_opt(&relu.runs.iter().map(|r| r.times.t_test).collect::<Vec<_>>());
    let (sb, sr) = (separation(baseline), separation(relu));
    let sep_ok = matches!((sb, sr), (Some(b), Some(r)) if (r - b).abs() <= SEPARATION_TOLERANCE * b);
    let later = match (t_base, t_relu) {
        (Some(b), Some(r)) => r > b,
        (Some(_), None) => true,
        _ => false,
    };
    result(
        "relu_embedding",
        majority(&non_negative) && sep_ok && later,
        format!(
            "non-negative output {}; peak separation baseline {} vs relu {} (within {SEPARATION_TOLERANCE}); \
             median t_test baseline {} vs relu {}",
            tally(&non_negative),
            sb.map_or("none".into(), |s| format!("{s:.3}")),
            sr.map_or("none".into(), |s| format!("{s:.3}")),
            fmt_opt(t_base),
            fmt_opt(t_relu)
        ),
    )
}

/// Under a modest positive shift the embedding mean returns towards zero
/// before training accuracy rises, and grokking still completes; a large
/// shift prevents generalization.
pub fn shifted_init(modest: &CellOutcome, large: &CellOutcome) -> CheckResult {
    let mut oks = Vec::new();
    let mut notes = Vec::new();
    for run in &modest.runs {
        let log = run.log();
        let centered = log.iter().find(|r| r.emb_mean.abs() < SHIFTED_MEAN_MAX).map(|r| r.epoch);
        let rising = log.iter().find(|r| r.train_acc > RISING_TRAIN_ACC).map(|r| r.epoch);
        let ok = matches!((centered, rising), (Some(c), Some(r)) if c < r) && run.times.t_test.is_some();
        notes.push(format!(
            "seed {}: |mean| < {SHIFTED_MEAN_MAX} at {}, train > {RISING_TRAIN_ACC} at {}, t_test {}",
            run.seed,
            fmt_opt(centered),
            fmt_opt(rising),
            fmt_opt(run.times.t_test)
        ));
        oks.push(ok);
    }
    let large_t = median_opt(&large.runs.iter().map(|r| r.times.t_test).collect::<Vec<_>>());
    result(
        "shifted_init",
        majority(&oks) && large_t.is_none(),
        format!(
            "{} ({}); large shift median t_test {}",
            tally(&oks),
            notes.join("; "),
            fmt_opt(large_t)
        ),
    )
}

/// `t_test`: unshifted < embeddings shifted < weights shifted.
pub fn layer_shift_ordering(none: &CellOutcome, embedding: &CellOutcome, weights: &CellOutcome) -> CheckResult {
    let t = |c: &CellOutcome| median_opt(&c.runs.iter().map(|r| r.times.t_test).collect::<Vec<_>>());
    let (a, b, c) = (t(none), t(embedding), t(weights));
    let passed = match (a, b, c) {
        (Some(a), Some(b), Some(c)) => a < b && b < c,
        (Some(a), Some(b), None) => a < b,
        _ => false,
    };
    result(
        "layer_shift_ordering",
        passed,
        format!(
            "median t_test none {}, embeddings {}, weights {}",
            fmt_opt(a),
            fmt_opt(b),
            fmt_opt(c)
        ),
    )
}

/// Constant embeddings still fit the training set; constant non-embedding
/// weights never get past [`CONSTANT_WEIGHTS_MAX_TRAIN_ACC`].
pub fn constant_init(embedding: &CellOutcome, weights: &CellOutcome) -> CheckResult {
    let fit = median_opt(&embedding.runs.iter().map(|r| r.times.t_train).collect::<Vec<_>>());
    let best = weights
        .runs
        .iter()
        .flat_map(|r| r.log().iter().map(|e| e.train_acc))
        .fold(0.0, f64::max);
    let trained = weights.runs.iter().all(|r| !r.log().is_empty());
    result(
        "constant_init",
        fit.is_some() && trained && best <= CONSTANT_WEIGHTS_MAX_TRAIN_ACC,
        format!(
            "constant embeddings median t_train {}; constant weights best train acc {best:.3} (<= {CONSTANT_WEIGHTS_MAX_TRAIN_ACC})",
            fmt_opt(fit)
        ),
    )
}

fn missing(id: &'static str, what: &str) -> CheckResult {
    result(id, false, format!("cell `{what}` missing from outcome"))
}

/// The checks a built-in preset is able to answer from its own outcome.
pub fn preset_checks(outcome: &PresetOutcome) -> Result<Vec<CheckResult>> {
    let cell = |label: &str| outcome.cell(label);
    let base = outcome.cells.first();
    let dims = outcome.preset.base.dims;
    Ok(match outcome.preset.name.as_str() {
        "fig1" => base.map_or_else(Vec::new, |c| vec![grokking_exists(c), variance_spike(c)]),
        "fig2" => base.map_or_else(Vec::new, |c| vec![drc_ordering(c)]),
        "fig3" => {
            let null = null_energy_baseline(dims, &InitSpec::default())?;
            base.map_or_else(Vec::new, |c| vec![cosine_structure(c, null)])
        }
        "fig4" => base.map_or_else(Vec::new, |c| vec![bimodal_embeddings(c)]),
        "fig11" => base.map_or_else(Vec::new, |c| vec![sparsity_trajectory(c)]),
        "fig5" => vec![alpha_scaling(&outcome.table)],
        "weight-decay" => vec![decay_sparsity(&outcome.table)],
        "frozen-embedding" => {
            let null = null_energy_baseline(dims, &InitSpec::default())?;
            vec![cell("frozen_embedding").map_or_else(|| missing("frozen_embedding", "frozen_embedding"), |c| frozen_embedding(c, null))]
        }
        "relu-embedding" => vec![match (cell("baseline"), cell("relu_embedding")) {
            (Some(b), Some(r)) => relu_embedding(b, r),
            _ => missing("relu_embedding", "baseline/relu_embedding"),
        }],
        "fig9" => vec![match (cell("uniform_0.4_0.8"), cell("uniform_1.6_2")) {
            (Some(m), Some(l)) => shifted_init(m, l),
            _ => missing("shifted_init", "uniform_0.4_0.8/uniform_1.6_2"),
        }],
        "fig10" => vec![match (cell("shift_none"), cell("shift_embedding"), cell("shift_weights")) {
            (Some(a), Some(b), Some(c)) => layer_shift_ordering(a, b, c),
            _ => missing("layer_shift_ordering", "shift_*"),
        }],
        "constant-init" => vec![match (cell("constant_embedding"), cell("constant_weights")) {
            (Some(e), Some(w)) => constant_init(e, w),
            _ => missing("constant_init", "constant_embedding/constant_weights"),
        }],
        _ => Vec::new(),
    })
}
