use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::GrokkingTimes;
use crate::trainer::EpochRecord;

/// Written in place of a time that was never reached within the budget.
pub const NO_GROK: &str = "no-grok";

/// One (cell, seed) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub label: String,
    pub value: f64,
    pub seed: u64,
    pub t_train: Option<usize>,
    pub t_test: Option<usize>,
    pub delay: Option<i64>,
    pub final_test_acc: f64,
    pub sparsity_min_epoch: Option<usize>,
    /// Set when training stopped on a non-finite value.
    pub diverged: bool,
}

impl RunRow {
    pub fn new(label: &str, value: f64, seed: u64, log: &[EpochRecord], times: &GrokkingTimes, diverged: bool) -> Self {
        Self {
            label: label.into(),
            value,
            seed,
            t_train: times.t_train,
            t_test: times.t_test,
            delay: times.delay,
            final_test_acc: log.last().map_or(0.0, |r| r.test_acc),
            sparsity_min_epoch: sparsity_min_epoch(log),
            diverged,
        }
    }
}

/// Per-cell medians over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub value: f64,
    pub t_train: Option<usize>,
    pub t_test: Option<usize>,
    pub delay: Option<i64>,
    pub final_test_acc: f64,
    pub sparsity_min_epoch: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunRow>,
}

/// Epoch at which the mean inactive fraction is smallest (first one on
/// ties).
pub fn sparsity_min_epoch(log: &[EpochRecord]) -> Option<usize> {
    log.iter()
        .min_by(|a, b| a.inactive_frac.total_cmp(&b.inactive_frac))
        .map(|r| r.epoch)
}

/// Median where `None` ranks above every value ("not within budget").
/// Even counts take the upper middle element.
pub fn median_opt<T: Ord + Copy>(values: &[Option<T>]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    v[v.len() / 2]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

impl SweepTable {
    /// Aggregates runs into one row per label, keeping first-seen order.
    pub fn from_runs(axis: &str, runs: Vec<RunRow>) -> Self {
        let mut labels: Vec<(String, f64)> = Vec::new();
        for r in &runs {
            if !labels.iter().any(|(l, _)| *l == r.label) {
                labels.push((r.label.clone(), r.value));
            }
        }
        let rows = labels
            .into_iter()
            .map(|(label, value)| {
                let group: Vec<&RunRow> = runs.iter().filter(|r| r.label == label).collect();
                let pick = |f: &dyn Fn(&RunRow) -> Option<usize>| median_opt(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
                SweepRow {
                    value,
                    t_train: pick(&|r| r.t_train),
                    t_test: pick(&|r| r.t_test),
                    delay: median_opt(&group.iter().map(|r| r.delay).collect::<Vec<_>>()),
                    final_test_acc: median(&group.iter().map(|r| r.final_test_acc).collect::<Vec<_>>()),
                    sparsity_min_epoch: pick(&|r| r.sparsity_min_epoch),
                    label,
                }
            })
            .collect();
        Self {
            axis: axis.into(),
            rows,
            runs,
        }
    }

    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["axis", "label", "value", "t_train", "t_test", "delay", "final_test_acc", "sparsity_min_epoch"])?;
        for r in &self.rows {
            out.write_record([
                self.axis.clone(),
                r.label.clone(),
                r.value.to_string(),
                opt(r.t_train),
                opt(r.t_test),
                opt(r.delay),
                r.final_test_acc.to_string(),
                opt(r.sparsity_min_epoch),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_runs_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "label",
            "value",
            "seed",
            "t_train",
            "t_test",
            "delay",
            "final_test_acc",
            "sparsity_min_epoch",
            "status",
        ])?;
        for r in &self.runs {
            out.write_record([
                r.label.clone(),
                r.value.to_string(),
                r.seed.to_string(),
                opt(r.t_train),
                opt(r.t_test),
                opt(r.delay),
                r.final_test_acc.to_string(),
                opt(r.sparsity_min_epoch),
                if r.diverged { "diverged" } else { "ok" }.into(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the medians table written by [`SweepTable::write_csv`].
    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut table = Self::default();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            table.axis = field(0).to_string();
            table.rows.push(SweepRow {
                label: field(1).to_string(),
                value: num(field(2))?,
                t_train: parse_opt(field(3))?,
                t_test: parse_opt(field(4))?,
                delay: parse_opt(field(5))?,
                final_test_acc: num(field(6))?,
                sparsity_min_epoch: parse_opt(field(7))?,
            });
        }
        Ok(table)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| NO_GROK.to_string(), |x| x.to_string())
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::InvalidConfig(format!("bad number `{s}` in sweep table")))
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
    if s == NO_GROK {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::InvalidConfig(format!("bad entry `{s}` in sweep table")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_ranks_last_in_median() {
        assert_eq!(median_opt(&[Some(5), None, Some(1)]), Some(5));
        assert_eq!(median_opt(&[None, None, Some(1)]), None);
        assert_eq!(median_opt::<u32>(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }

    #[test]
    fn csv_round_trip() {
        let run = |label: &str, seed, t_test| RunRow {
            label: label.into(),
            value: 3.0,
            seed,
            t_train: Some(200),
            t_test,
            delay: t_test.map(|t: usize| t as i64 - 200),
            final_test_acc: 0.123456789,
            sparsity_min_epoch: Some(90),
            diverged: false,
        };
        let t = SweepTable::from_runs("alpha", vec![run("a", 0, Some(900)), run("a", 1, None), run("a", 2, Some(800))]);
        assert_eq!(t.rows[0].t_test, Some(900));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = SweepTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, t.rows);

        let t = SweepTable::from_runs("alpha", vec![run("b", 0, None), run("b", 1, None), run("b", 2, Some(1))]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("no-grok"));
    }
}
