use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::gemm;
use crate::model::{init_params, InitSpec, ModelDims};
use crate::numerics::{Matrix, RngStream};

/// Pairwise cosine similarity of the rows of an embedding table.
///
/// The result is exactly symmetric with an exact unit diagonal, and entries
/// are clamped to `[-1, 1]`.
pub fn cosine_similarity_matrix(embedding: &Matrix) -> Result<Matrix> {
    let p = embedding.rows();
    let mut unit = embedding.clone();
    for r in 0..p {
        let row = unit.row_mut(r);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateEmbedding { row: r });
        }
        row.iter_mut().for_each(|x| *x /= norm);
    }
    let mut c = Matrix::zeros(p, p);
    gemm(1.0, &unit, false, &unit, true, 0.0, &mut c);
    for i in 0..p {
        c.set(i, i, 1.0);
        for j in i + 1..p {
            let v = c.get(i, j).clamp(-1.0, 1.0);
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    Ok(c)
}

/// Share of off-diagonal similarity variance explained by codiagonal bands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodiagonalEnergy {
    /// Cells grouped by `(i - j) mod P`.
    pub difference: f64,
    /// Cells grouped by `(i + j) mod P`.
    pub sum: f64,
}

impl CodiagonalEnergy {
    pub fn max(&self) -> f64 {
        self.difference.max(self.sum)
    }
}

/// Between-group over total variance (η²) of the off-diagonal cells.
fn eta_squared(c: &Matrix, group_of: impl Fn(usize, usize) -> usize) -> f64 {
    let p = c.rows();
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    let mut total = 0.0;
    let mut n = 0usize;
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let v = c.get(i, j);
            let g = group_of(i, j);
            sums[g] += v;
            counts[g] += 1;
            total += v;
            n += 1;
        }
    }
    let grand = total / n as f64;
    let ss_total: f64 = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| (c.get(i, j) - grand).powi(2))
        .sum();
    if ss_total <= f64::EPSILON * n as f64 {
        return 0.0;
    }
    let ss_between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &k)| k > 0)
        .map(|(&s, &k)| k as f64 * (s / k as f64 - grand).powi(2))
        .sum();
    (ss_between / ss_total).clamp(0.0, 1.0)
}

/// Scores how banded a `P x P` similarity matrix is; 0 for no band
/// structure, 1 when every cell is determined by its band.
pub fn codiagonal_energy(c: &Matrix) -> Result<CodiagonalEnergy> {
    let p = c.rows();
    if c.cols() != p {
        return Err(Error::Shape {
            op: "codiagonal_energy",
            left: c.shape(),
            right: (p, p),
        });
    }
    if p < 3 {
        return Err(Error::UndefinedMetric(format!(
            "codiagonal energy needs P >= 3, got {p}"
        )));
    }
    Ok(CodiagonalEnergy {
        difference: eta_squared(c, |i, j| (i + p - j) % p),
        sum: eta_squared(c, |i, j| (i + j) % p),
    })
}

/// Codiagonal energy (the larger grouping) of freshly initialized embedding
/// tables, one per seed in `seeds`: the level expected from no learned
/// structure at all.
pub fn null_codiagonal_energies(
    dims: ModelDims,
    init: &InitSpec,
    seeds: std::ops::Range<u64>,
) -> Result<Vec<f64>> {
    seeds
        .map(|seed| {
            let params = init_params(dims, init, &RngStream::new(seed, "master"))?;
            Ok(codiagonal_energy(&cosine_similarity_matrix(&params.embedding)?)?.max())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample, DistributionSpec};

    #[test]
    fn reference_pair() {
        let e = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let c = cosine_similarity_matrix(&e).unwrap();
        assert!((c.get(0, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(1, 1), 1.0);
    }

    #[test]
    fn orthogonal_rows() {
        let c = cosine_similarity_matrix(&Matrix::identity(5)).unwrap();
        assert_eq!(c, Matrix::identity(5));
    }

    #[test]
    fn zero_row_is_named() {
        let e = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.3, 0.1]]);
        assert!(matches!(
            cosine_similarity_matrix(&e),
            Err(Error::DegenerateEmbedding { row: 1 })
        ));
    }

    #[test]
    fn constant_off_diagonal_scores_zero() {
        let mut c = Matrix::filled(7, 7, 0.3);
        (0..7).for_each(|i| c.set(i, i, 1.0));
        let e = codiagonal_energy(&c).unwrap();
        assert_eq!(e.difference, 0.0);
        assert_eq!(e.sum, 0.0);
    }

    #[test]
    fn perfect_bands_score_one() {
        let p = 11;
        let mut c = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let k = (i as f64 - j as f64) * std::f64::consts::TAU / p as f64;
                c.set(i, j, k.cos());
            }
        }
        let e = codiagonal_energy(&c).unwrap();
        assert!((e.difference - 1.0).abs() < 1e-12);
        assert!((e.max() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_modulus_undefined() {
        assert!(matches!(
            codiagonal_energy(&Matrix::identity(2)),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn shifted_rows_keep_score() {
        let mut rng = RngStream::new(4, "e");
        let e = sample(DistributionSpec::Normal { mean: 0.0, std: 1.0 }, 9, 4, &mut rng).unwrap();
        let mut shifted = Matrix::zeros(9, 4);
        for r in 0..9 {
            shifted.row_mut((r + 4) % 9).copy_from_slice(e.row(r));
        }
        let a = codiagonal_energy(&cosine_similarity_matrix(&e).unwrap()).unwrap();
        let b = codiagonal_energy(&cosine_similarity_matrix(&shifted).unwrap()).unwrap();
        assert!((a.difference - b.difference).abs() < 1e-12);
    }
}
