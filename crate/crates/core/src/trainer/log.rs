use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of the per-epoch CSV log. Column order is part of the file format.
pub const LOG_HEADER: &str =
    "epoch,train_loss,train_acc,test_acc,emb_mean,emb_std,w1_mean,w1_std,w2_mean,w2_std,dead_frac";

/// Header of the companion activity CSV.
pub const ACTIVITY_HEADER: &str = "epoch,dead_frac,inactive_frac";

/// One row of the training log, measured after `epoch` epochs of updates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub emb_mean: f64,
    pub emb_std: f64,
    pub w1_mean: f64,
    pub w1_std: f64,
    pub w2_mean: f64,
    pub w2_std: f64,
    /// Hidden units silent on every example of the dataset.
    pub dead_frac: f64,
    /// Mean over examples of the fraction of silent hidden units.
    pub inactive_frac: f64,
    /// Seconds since training started. Not persisted, so logs stay
    /// byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Writes the epoch log. Floats use Rust's shortest round-trip formatting.
pub fn write_log_csv(records: &[EpochRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            r.train_acc,
            r.test_acc,
            r.emb_mean,
            r.emb_std,
            r.w1_mean,
            r.w1_std,
            r.w2_mean,
            r.w2_std,
            r.dead_frac
        )?;
    }
    Ok(())
}

pub fn write_activity_csv(records: &[EpochRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{ACTIVITY_HEADER}")?;
    for r in records {
        writeln!(w, "{},{},{}", r.epoch, r.dead_frac, r.inactive_frac)?;
    }
    Ok(())
}

/// Reads a log written by [`write_log_csv`], optionally merging the
/// activity columns. `inactive_frac` is NaN when no activity file is given.
pub fn read_log_csv(log: impl Read, activity: Option<impl Read>) -> Result<Vec<EpochRecord>> {
    let mut rdr = csv::Reader::from_reader(log);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != LOG_HEADER {
        return Err(Error::InvalidConfig(format!(
            "unexpected log header `{}`",
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = |k: usize| -> Result<f64> {
            row[k]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad number `{}`", &row[k])))
        };
        out.push(EpochRecord {
            epoch: row[0]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad epoch `{}`", &row[0])))?,
            train_loss: f(1)?,
            train_acc: f(2)?,
            test_acc: f(3)?,
            emb_mean: f(4)?,
            emb_std: f(5)?,
            w1_mean: f(6)?,
            w1_std: f(7)?,
            w2_mean: f(8)?,
            w2_std: f(9)?,
            dead_frac: f(10)?,
            inactive_frac: f64::NAN,
            wall_time: 0.0,
        });
    }
    if let Some(activity) = activity {
        let mut rdr = csv::Reader::from_reader(activity);
        for (rec, row) in out.iter_mut().zip(rdr.records()) {
            let row = row?;
            rec.inactive_frac = row[2]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad number `{}`", &row[2])))?;
        }
    }
    Ok(out)
}
