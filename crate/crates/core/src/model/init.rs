use serde::{Deserialize, Serialize};

use super::{ModelDims, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{sample, DistributionSpec, Matrix, RngStream};

/// How one parameter group is initialized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupInit {
    /// `N(0, scale * sqrt(2 / (fan_in + fan_out)))`, fans taken from the
    /// weight matrix of the group. Biases use the same standard deviation.
    XavierNormal { scale: f64 },
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

impl Default for GroupInit {
    fn default() -> Self {
        Self::XavierNormal { scale: 1.0 }
    }
}

impl GroupInit {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::XavierNormal { scale } => {
                if !(scale.is_finite() && scale >= 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "xavier scale must be finite and >= 1, got {scale}"
                    )));
                }
                Ok(())
            }
            _ => self.distribution(1, 1).validate(),
        }
    }

    /// The elementwise distribution for a weight matrix of the given fans.
    pub fn distribution(&self, fan_in: usize, fan_out: usize) -> DistributionSpec {
        match *self {
            Self::XavierNormal { scale } => DistributionSpec::Normal {
                mean: 0.0,
                std: scale * xavier_std(fan_in, fan_out),
            },
            Self::Normal { mean, std } => DistributionSpec::Normal { mean, std },
            Self::Uniform { lo, hi } => DistributionSpec::Uniform { lo, hi },
            Self::Constant { value } => DistributionSpec::Constant { value },
        }
    }
}

/// Xavier-normal standard deviation `sqrt(2 / (fan_in + fan_out))`.
pub fn xavier_std(fan_in: usize, fan_out: usize) -> f64 {
    (2.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Per-group initialization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitSpec {
    pub embedding: GroupInit,
    /// W1 and b1.
    pub hidden: GroupInit,
    /// W2 and b2.
    pub output: GroupInit,
}

impl InitSpec {
    /// The same rule for every group.
    pub fn uniform_all(init: GroupInit) -> Self {
        Self {
            embedding: init,
            hidden: init,
            output: init,
        }
    }

    /// Xavier-normal everywhere, scaled by `alpha`.
    pub fn xavier_scaled(alpha: f64) -> Self {
        Self::uniform_all(GroupInit::XavierNormal { scale: alpha })
    }

    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        self.hidden.validate()?;
        self.output.validate()
    }
}

/// Samples fresh parameters.
///
/// Each group draws from its own sub-stream of `rng`'s seed
/// (`init.embedding`, `init.hidden`, `init.output`), weights before biases.
pub fn init_params(dims: ModelDims, spec: &InitSpec, rng: &RngStream) -> Result<ModelParams> {
    dims.validate()?;
    spec.validate()?;
    let ModelDims {
        modulus: p,
        embed_dim: d,
        hidden: h,
    } = dims;

    let mut emb_rng = rng.derive("init.embedding");
    let embedding = sample(spec.embedding.distribution(p, d), p, d, &mut emb_rng)?;

    let mut hid_rng = rng.derive("init.hidden");
    let (w1, b1) = layer(spec.hidden, 2 * d, h, &mut hid_rng)?;

    let mut out_rng = rng.derive("init.output");
    let (w2, b2) = layer(spec.output, h, p, &mut out_rng)?;

    Ok(ModelParams {
        embedding,
        w1,
        b1,
        w2,
        b2,
    })
}

fn layer(init: GroupInit, fan_in: usize, fan_out: usize, rng: &mut RngStream) -> Result<(Matrix, Matrix)> {
    let dist = init.distribution(fan_in, fan_out);
    let w = sample(dist, fan_in, fan_out, rng)?;
    let b = sample(dist, 1, fan_out, rng)?;
    Ok((w, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_of(m: &Matrix) -> f64 {
        let n = m.len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        (m.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    #[test]
    fn xavier_reference_values() {
        assert_eq!(xavier_std(256, 256), 0.0625);
        assert!((xavier_std(256, 53) - 0.080_45).abs() < 5e-6);
    }

    #[test]
    fn sampled_std_follows_fans() {
        let params = init_params(ModelDims::default(), &InitSpec::default(), &RngStream::new(1, "x")).unwrap();
        assert!((std_of(&params.w1) / 0.0625 - 1.0).abs() < 0.02);
        assert!((std_of(&params.w2) / xavier_std(256, 53) - 1.0).abs() < 0.03);
        assert!((std_of(&params.embedding) / xavier_std(53, 128) - 1.0).abs() < 0.05);
    }

    #[test]
    fn alpha_scales_std() {
        let dims = ModelDims::default();
        let base = init_params(dims, &InitSpec::xavier_scaled(1.0), &RngStream::new(2, "x")).unwrap();
        let wide = init_params(dims, &InitSpec::xavier_scaled(5.0), &RngStream::new(2, "x")).unwrap();
        // Same streams, so entries scale exactly.
        for (a, b) in base.w1.data().iter().zip(wide.w1.data()) {
            assert!((5.0 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_embedding() {
        let spec = InitSpec {
            embedding: GroupInit::Constant { value: 0.7 },
            ..InitSpec::default()
        };
        let p = init_params(ModelDims::default(), &spec, &RngStream::new(0, "x")).unwrap();
        assert!(p.embedding.data().iter().all(|&x| x == 0.7));
    }

    #[test]
    fn changing_embedding_init_leaves_other_groups() {
        let dims = ModelDims::default();
        let a = init_params(dims, &InitSpec::default(), &RngStream::new(3, "x")).unwrap();
        let spec = InitSpec {
            embedding: GroupInit::Uniform { lo: 0.4, hi: 0.8 },
            ..InitSpec::default()
        };
        let b = init_params(dims, &spec, &RngStream::new(3, "x")).unwrap();
        assert_ne!(a.embedding, b.embedding);
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.b2, b.b2);
    }

    #[test]
    fn scale_below_one_rejected() {
        let spec = InitSpec::xavier_scaled(0.5);
        assert!(init_params(ModelDims::default(), &spec, &RngStream::new(0, "x")).is_err());
    }
}
