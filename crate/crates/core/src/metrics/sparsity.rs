use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward, ModelParams, Variant};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    /// Units whose post-ReLU output is exactly zero on every example, over H.
    pub dead_fraction: f64,
    /// Mean over examples of the fraction of zero hidden outputs.
    pub inactive_fraction: f64,
    pub dead_units: usize,
    pub examples: usize,
}

/// Sparsity of stacked `examples x H` activation matrices.
pub fn activity_from_hidden(blocks: &[&Matrix]) -> Result<SparsityReport> {
    let h = blocks.first().map(|m| m.cols()).ok_or(Error::EmptyInput)?;
    let mut alive = vec![false; h];
    let mut zeros = 0usize;
    let mut examples = 0usize;
    for m in blocks {
        if m.cols() != h {
            return Err(Error::Shape {
                op: "activity_from_hidden",
                left: (examples, h),
                right: m.shape(),
            });
        }
        for r in 0..m.rows() {
            for (a, &x) in alive.iter_mut().zip(m.row(r)) {
                if x == 0.0 {
                    zeros += 1;
                } else {
                    *a = true;
                }
            }
        }
        examples += m.rows();
    }
    if examples == 0 {
        return Err(Error::EmptyInput);
    }
    let dead_units = alive.iter().filter(|&&a| !a).count();
    Ok(SparsityReport {
        dead_fraction: dead_units as f64 / h as f64,
        inactive_fraction: zeros as f64 / (examples * h) as f64,
        dead_units,
        examples,
    })
}

/// Dead and inactive hidden units over an evaluation set, without dropout.
pub fn sparsity(params: &ModelParams, variant: &Variant, pairs: &[(usize, usize)]) -> Result<SparsityReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let trace = forward(params, variant, pairs, None, None)?;
    activity_from_hidden(&[&trace.hidden])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;

    fn dims() -> ModelDims {
        ModelDims {
            modulus: 5,
            embed_dim: 3,
            hidden: 4,
        }
    }

    fn all_pairs() -> Vec<(usize, usize)> {
        (0..5).flat_map(|a| (0..5).map(move |b| (a, b))).collect()
    }

    #[test]
    fn negative_first_layer_kills_everything() {
        let mut p = ModelParams::zeros(dims());
        p.embedding = Matrix::filled(5, 3, 0.5);
        p.w1 = Matrix::filled(6, 4, -0.1);
        p.b1 = Matrix::filled(1, 4, -0.2);
        let s = sparsity(&p, &Variant::default(), &all_pairs()).unwrap();
        assert_eq!(s.dead_fraction, 1.0);
        assert_eq!(s.inactive_fraction, 1.0);
    }

    #[test]
    fn positive_bias_keeps_everything_alive() {
        let mut p = ModelParams::zeros(dims());
        p.b1 = Matrix::filled(1, 4, 5.0);
        let s = sparsity(&p, &Variant::default(), &all_pairs()).unwrap();
        assert_eq!(s.dead_fraction, 0.0);
        assert_eq!(s.inactive_fraction, 0.0);
    }

    #[test]
    fn empty_set_rejected() {
        let p = ModelParams::zeros(dims());
        assert!(matches!(sparsity(&p, &Variant::default(), &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn counts_per_unit() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]);
        let s = activity_from_hidden(&[&m]).unwrap();
        assert_eq!(s.dead_units, 1);
        assert!((s.inactive_fraction - 4.0 / 6.0).abs() < 1e-15);
    }
}
