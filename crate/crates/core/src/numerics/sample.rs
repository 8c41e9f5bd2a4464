use serde::{Deserialize, Serialize};

use super::{Matrix, RngStream};
use crate::error::{Error, Result};

/// An elementwise distribution for filling a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Normal { mean, std } => {
                if !mean.is_finite() || !std.is_finite() || std < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "normal needs finite mean and std >= 0, got mean={mean} std={std}"
                    )));
                }
            }
            Self::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::InvalidSpec(format!(
                        "uniform needs finite lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
            Self::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidSpec(format!("constant {value} is not finite")));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Self::Normal { mean, std } => mean + std * rng.next_normal(),
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.next_f64(),
            Self::Constant { value } => value,
        }
    }
}

/// Fills a `rows x cols` matrix with i.i.d. draws, in row-major order.
pub fn sample(
    spec: DistributionSpec,
    rows: usize,
    cols: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    spec.validate()?;
    let data = (0..rows * cols).map(|_| spec.draw(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_std(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn zero_variance_normal_is_constant() {
        let mut rng = RngStream::new(1, "t");
        let m = sample(DistributionSpec::Normal { mean: 0.2, std: 0.0 }, 4, 4, &mut rng).unwrap();
        assert!(m.data().iter().all(|&x| x == 0.2));
    }

    #[test]
    fn shifted_uniform_mean_and_support() {
        let mut rng = RngStream::new(2, "t");
        let m = sample(DistributionSpec::Uniform { lo: 0.4, hi: 0.8 }, 100, 100, &mut rng).unwrap();
        assert!(m.data().iter().all(|&x| (0.4..=0.8).contains(&x)));
        let (mean, _) = mean_std(m.data());
        assert!((mean - 0.6).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn same_stream_same_matrix() {
        let spec = DistributionSpec::Normal { mean: 0.0, std: 1.0 };
        let a = sample(spec, 8, 5, &mut RngStream::new(3, "init.w1")).unwrap();
        let b = sample(spec, 8, 5, &mut RngStream::new(3, "init.w1")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normal_std_within_two_percent() {
        let sigma = 0.0625;
        let mut rng = RngStream::new(4, "t");
        let m = sample(DistributionSpec::Normal { mean: 0.0, std: sigma }, 100, 1000, &mut rng)
            .unwrap();
        let (mean, std) = mean_std(m.data());
        assert!((std / sigma - 1.0).abs() < 0.02, "std {std}");
        assert!(mean.abs() < 0.01 * sigma * 10.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut rng = RngStream::new(0, "t");
        for spec in [
            DistributionSpec::Normal { mean: 0.0, std: -1.0 },
            DistributionSpec::Uniform { lo: 1.0, hi: 0.0 },
            DistributionSpec::Constant { value: f64::NAN },
        ] {
            assert!(matches!(sample(spec, 2, 2, &mut rng), Err(Error::InvalidSpec(_))));
        }
    }
}
