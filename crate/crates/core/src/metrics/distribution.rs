use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and population standard deviation, accumulated relative to the
/// first value (exact for constant input).
pub fn moments(values: &[f64]) -> Result<(f64, f64)> {
    let &shift = values.first().ok_or(Error::EmptyInput)?;
    let n = values.len() as f64;
    let (s1, s2) = values.iter().fold((0.0, 0.0), |(s1, s2), &x| {
        let d = x - shift;
        (s1 + d, s2 + d * d)
    });
    let m = s1 / n;
    Ok((shift + m, (s2 / n - m * m).max(0.0).sqrt()))
}

/// Fixed-width histogram over `[lo, hi]`. The last bin is closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub const DEFAULT_BINS: usize = 101;

    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::InvalidConfig(format!(
                "histogram needs hi > lo and bins > 0, got [{lo}, {hi}] with {bins}"
            )));
        }
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let k = ((v - lo) / width).floor();
            let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
            counts[k] += 1;
        }
        Ok(Self {
            lo,
            hi,
            counts,
            total: values.len() as u64,
        })
    }

    /// Bins over `[-max|v|, max|v|]`; an all-zero input uses `[-1, 1]`.
    pub fn symmetric(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let m = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m = if m > 0.0 { m } else { 1.0 };
        Self::new(values, -m, m, bins)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width()
    }

    /// The mirror image about zero (bins reversed, range negated).
    pub fn reflected(&self) -> Self {
        let mut counts = self.counts.clone();
        counts.reverse();
        Self {
            lo: -self.hi,
            hi: -self.lo,
            counts,
            total: self.total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub mean: f64,
    pub std: f64,
    pub histogram: Histogram,
}

/// Moments plus a symmetric histogram with the default bin count.
pub fn distribution_stats(values: &[f64]) -> Result<DistributionStats> {
    let (mean, std) = moments(values)?;
    Ok(DistributionStats {
        mean,
        std,
        histogram: Histogram::symmetric(values, Histogram::DEFAULT_BINS)?,
    })
}

/// Centered moving average; windows are truncated at the ends.
fn smooth(counts: &[u64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = counts.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            let s: u64 = counts[lo..=hi].iter().sum();
            s as f64 / (hi - lo + 1) as f64
        })
        .collect()
}

/// Strict local maxima as `(left, right)` index ranges; a flat top counts
/// once if both of its neighbours are lower. End bins never qualify.
fn local_maxima(y: &[f64]) -> Vec<(usize, usize)> {
    let mut peaks = Vec::new();
    let mut k = 1;
    while k + 1 < y.len() {
        if y[k - 1] < y[k] {
            let mut right = k;
            while right + 1 < y.len() && y[right + 1] == y[k] {
                right += 1;
            }
            if right + 1 < y.len() && y[right + 1] < y[k] {
                peaks.push((k, right));
            }
            k = right + 1;
        } else {
            k += 1;
        }
    }
    peaks
}

/// Topographic prominence: height above the higher of the two lowest
/// points reached before climbing to something taller on each side.
fn prominence(y: &[f64], (left, right): (usize, usize)) -> f64 {
    let h = y[left];
    let mut left_min = h;
    for &v in y[..left].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &y[right + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Finds two opposite-sign peaks, returned as `(negative, positive)`
/// locations.
///
/// Counts are smoothed with a 5-bin centered moving average. Candidates are
/// strict local maxima whose prominence is at least 20% of the smoothed
/// global maximum; the two tallest candidates must straddle zero.
pub fn detect_bimodality(h: &Histogram) -> Option<(f64, f64)> {
    if h.bins() < 3 || h.total == 0 {
        return None;
    }
    let y = smooth(&h.counts, 5);
    let global = y.iter().copied().fold(0.0, f64::max);
    let mut peaks: Vec<(f64, f64)> = local_maxima(&y)
        .into_iter()
        .filter(|&span| prominence(&y, span) >= 0.2 * global)
        .map(|(l, r)| (y[l], 0.5 * (h.center(l) + h.center(r))))
        .collect();
    // Tallest first; equal heights fall back to location for determinism.
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    match peaks.as_slice() {
        [(_, x1), (_, x2), ..] if x1 * x2 < 0.0 => Some((x1.min(*x2), x1.max(*x2))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn normals(n: usize, mean: f64, std: f64, rng: &mut RngStream) -> Vec<f64> {
        (0..n).map(|_| mean + std * rng.next_normal()).collect()
    }

    #[test]
    fn constant_group() {
        let s = distribution_stats(&[0.7; 50]).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.histogram.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(s.histogram.counts.iter().sum::<u64>(), 50);
    }

    #[test]
    fn gaussian_std_bound() {
        let mut rng = RngStream::new(1, "h");
        let xs = normals(10_000, 0.0, 0.0625, &mut rng);
        let s = distribution_stats(&xs).unwrap();
        assert!((s.std / 0.0625 - 1.0).abs() < 0.02);
        assert_eq!(s.histogram.total, 10_000);
        assert_eq!(s.histogram.counts.iter().sum::<u64>(), 10_000);
        assert!((s.histogram.lo + s.histogram.hi).abs() < 1e-15);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(distribution_stats(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn unimodal_has_no_pair() {
        let mut rng = RngStream::new(2, "h");
        let xs = normals(20_000, 0.0, 0.3, &mut rng);
        assert_eq!(detect_bimodality(&Histogram::symmetric(&xs, 101).unwrap()), None);
    }

    #[test]
    fn symmetric_mixture_peaks() {
        let mut rng = RngStream::new(3, "h");
        let mut xs = normals(10_000, -0.4, 0.05, &mut rng);
        xs.extend(normals(10_000, 0.4, 0.05, &mut rng));
        let (neg, pos) = detect_bimodality(&Histogram::symmetric(&xs, 101).unwrap()).unwrap();
        assert!((neg + 0.4).abs() <= 0.05, "{neg}");
        assert!((pos - 0.4).abs() <= 0.05, "{pos}");
    }

    #[test]
    fn same_sign_peaks_rejected() {
        let mut rng = RngStream::new(4, "h");
        let mut xs = normals(10_000, 0.2, 0.03, &mut rng);
        xs.extend(normals(10_000, 0.6, 0.03, &mut rng));
        xs.push(-0.7);
        assert_eq!(detect_bimodality(&Histogram::symmetric(&xs, 101).unwrap()), None);
    }

    #[test]
    fn plateau_counts_once() {
        assert_eq!(local_maxima(&[0.0, 1.0, 3.0, 3.0, 3.0, 1.0, 0.0]), vec![(2, 4)]);
        assert_eq!(local_maxima(&[3.0, 1.0, 1.0, 3.0]), vec![]);
    }
}
