//! The modular-addition task and its train/test split.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// One labelled example: `(a + b) mod P = label`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub a: usize,
    pub b: usize,
    pub label: usize,
}

/// Every pair `(a, b)` with `0 <= a, b < P`, in lexicographic order, so the
/// example at index `a * P + b` is `(a, b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModTask {
    modulus: usize,
    examples: Vec<Example>,
}

impl ModTask {
    pub fn generate(modulus: usize) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidModulus(modulus));
        }
        let examples = (0..modulus)
            .flat_map(|a| {
                (0..modulus).map(move |b| Example {
                    a,
                    b,
                    label: (a + b) % modulus,
                })
            })
            .collect();
        Ok(Self { modulus, examples })
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    /// Token pairs and labels for the given example indices.
    pub fn batch(&self, indices: &[usize]) -> (Vec<(usize, usize)>, Vec<usize>) {
        indices
            .iter()
            .map(|&k| {
                let e = self.examples[k];
                ((e.a, e.b), e.label)
            })
            .unzip()
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.examples.len()).collect()
    }

    /// Shuffles all indices and cuts at `floor(fraction * P^2)`.
    pub fn split(&self, fraction: f64, rng: &mut RngStream) -> Result<Split> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidFraction(fraction));
        }
        let mut order = self.all_indices();
        order.shuffle(rng);
        let cut = (fraction * self.len() as f64).floor() as usize;
        let test = order.split_off(cut);
        Ok(Split {
            train: order,
            test,
            fraction,
            seed: rng.seed(),
        })
    }
}

/// A partition of example indices into train and test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_match_brute_force() {
        let task = ModTask::generate(53).unwrap();
        assert_eq!(task.len(), 2809);
        for (k, e) in task.examples().iter().enumerate() {
            assert_eq!((e.a, e.b), (k / 53, k % 53));
            let mut s = e.a + e.b;
            while s >= 53 {
                s -= 53;
            }
            assert_eq!(e.label, s);
        }
        assert_eq!(task.examples()[5 * 53 + 50].label, 2);
        assert_eq!(task.examples()[0].label, 0);
    }

    #[test]
    fn tiny_modulus_rejected() {
        assert!(matches!(ModTask::generate(1), Err(Error::InvalidModulus(1))));
    }

    #[test]
    fn default_split_sizes_and_partition() {
        let task = ModTask::generate(53).unwrap();
        let split = task.split(0.5, &mut RngStream::new(0, "split")).unwrap();
        assert_eq!(split.train.len(), 1404);
        assert_eq!(split.test.len(), 1405);
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..2809).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let task = ModTask::generate(11).unwrap();
        let a = task.split(0.3, &mut RngStream::new(9, "split")).unwrap();
        let b = task.split(0.3, &mut RngStream::new(9, "split")).unwrap();
        assert_eq!(a, b);
        let c = task.split(0.3, &mut RngStream::new(10, "split")).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn fraction_bounds() {
        let task = ModTask::generate(5).unwrap();
        let mut rng = RngStream::new(0, "split");
        for f in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(matches!(task.split(f, &mut rng), Err(Error::InvalidFraction(_))));
        }
    }
}
