//! AdamW with decoupled weight decay.
//!
//! Per entry, at step `t` (starting from 1):
//!
//! ```text
//! m ← β1·m + (1−β1)·g
//! v ← β2·v + (1−β2)·g²
//! m̂ = m / (1−β1^t),  v̂ = v / (1−β2^t)
//! w ← w − lr·m̂/(√v̂ + ε) − lr·λ·w
//! ```
//!
//! Both terms use the pre-step `w`. Decay applies to every unfrozen tensor,
//! biases and embeddings included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptHyper {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1.0,
        }
    }
}

impl OptHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps >= 0.0
            && self.weight_decay >= 0.0
            && [self.lr, self.eps, self.weight_decay].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad optimizer settings {self:?}")))
        }
    }
}

/// Moment accumulators and the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamWState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: ModelParams::zeros(params.dims()),
            v: ModelParams::zeros(params.dims()),
            t: 0,
        }
    }
}

/// One AdamW step. Frozen groups (per `variant`) are left untouched,
/// moments included. A non-finite gradient aborts before anything changes.
pub fn step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamWState,
    hyper: &OptHyper,
    variant: &Variant,
) -> Result<()> {
    for ((name, g), group) in grads.named().iter().zip(ModelParams::GROUPS) {
        if !variant.is_frozen(group) && !g.is_finite() {
            return Err(Error::PoisonedGradient { group: name });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let decay = hyper.lr * hyper.weight_decay;

    let tensors = params
        .named_mut()
        .into_iter()
        .zip(grads.named())
        .zip(state.m.named_mut())
        .zip(state.v.named_mut())
        .zip(ModelParams::GROUPS);
    for (((((_, w), (_, g)), (_, m)), (_, v)), group) in tensors {
        if variant.is_frozen(group) {
            continue;
        }
        let it = w
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut());
        for (((w, &g), m), v) in it {
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps) + decay * *w;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, InitSpec, ModelDims};
    use crate::numerics::{Matrix, RngStream};

    fn dims() -> ModelDims {
        ModelDims {
            modulus: 5,
            embed_dim: 3,
            hidden: 4,
        }
    }

    fn params() -> ModelParams {
        init_params(dims(), &InitSpec::default(), &RngStream::new(3, "opt")).unwrap()
    }

    fn scalar(w: f64) -> ModelParams {
        let d = ModelDims {
            modulus: 2,
            embed_dim: 1,
            hidden: 1,
        };
        let mut p = ModelParams::zeros(d);
        p.b1 = Matrix::filled(1, 1, w);
        p
    }

    #[test]
    fn zero_grad_no_decay_is_noop() {
        let mut p = params();
        let before = p.clone();
        let mut s = AdamWState::new(&p);
        let hyper = OptHyper {
            weight_decay: 0.0,
            ..OptHyper::default()
        };
        step(&mut p, &ModelParams::zeros(dims()), &mut s, &hyper, &Variant::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_grad_unit_decay_shrinks() {
        let mut p = params();
        let before = p.clone();
        let mut s = AdamWState::new(&p);
        step(&mut p, &ModelParams::zeros(dims()), &mut s, &OptHyper::default(), &Variant::default())
            .unwrap();
        for ((_, a), (_, b)) in p.named().iter().zip(before.named().iter()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y * (1.0 - 3e-4)).abs() <= 1e-15 * y.abs());
            }
        }
    }

    #[test]
    fn first_step_by_hand() {
        let mut p = scalar(1.0);
        let mut g = ModelParams::zeros(p.dims());
        g.b1 = Matrix::filled(1, 1, 1.0);
        let mut s = AdamWState::new(&p);
        let hyper = OptHyper {
            weight_decay: 0.0,
            ..OptHyper::default()
        };
        step(&mut p, &g, &mut s, &hyper, &Variant::default()).unwrap();
        assert!((s.m.b1.get(0, 0) - 0.1).abs() < 1e-15);
        assert!((s.v.b1.get(0, 0) - 0.001).abs() < 1e-15);
        let want = 1.0 - 3e-4 / (1.0 + 1e-8);
        assert!((p.b1.get(0, 0) - want).abs() < 1e-15);
    }

    #[test]
    fn frozen_groups_untouched() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.clone();
        g.named_mut().iter_mut().for_each(|(_, m)| m.map_inplace(|_| 0.5));
        let mut s = AdamWState::new(&p);
        let v = Variant {
            freeze_embedding: true,
            ..Variant::default()
        };
        step(&mut p, &g, &mut s, &OptHyper::default(), &v).unwrap();
        assert_eq!(p.embedding, before.embedding);
        assert_eq!(s.m.embedding, Matrix::zeros(5, 3));
        assert_ne!(p.w1, before.w1);
    }

    #[test]
    fn poisoned_gradient_aborts() {
        let mut p = params();
        let before = p.clone();
        let mut g = ModelParams::zeros(dims());
        g.w2.set(0, 0, f64::NAN);
        let mut s = AdamWState::new(&p);
        let err = step(&mut p, &g, &mut s, &OptHyper::default(), &Variant::default()).unwrap_err();
        assert!(matches!(err, Error::PoisonedGradient { group: "w2" }));
        assert_eq!(p, before);
        assert_eq!(s.t, 0);
    }
}
