//! The modular-addition MLP.
//!
//! Two token ids are looked up in a shared embedding table, concatenated,
//! and passed through one ReLU hidden layer and a linear readout:
//!
//! ```text
//! logits = ReLU([E[a], E[b]] · W1 + b1) · W2 + b2
//! ```
//!
//! Variants add a ReLU on the embeddings or freeze a parameter group, and
//! inverted dropout can be applied to the hidden activations (and
//! optionally the embeddings).

mod checkpoint;
mod init;
mod network;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use init::{init_params, GroupInit, InitSpec};
pub use network::{backward, forward, loss_and_accuracy, softmax_rows, ForwardTrace};

/// Vocabulary/output size, embedding width, hidden width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub modulus: usize,
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            modulus: 53,
            embed_dim: 128,
            hidden: 256,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.modulus < 2 {
            return Err(Error::InvalidModulus(self.modulus));
        }
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig(format!(
                "embedding and hidden widths must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// The three independently initialized (and freezable) parameter groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Embedding,
    Hidden,
    Output,
}

/// All learnable state. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `P x d`
    pub embedding: Matrix,
    /// `2d x H`
    pub w1: Matrix,
    /// `1 x H`
    pub b1: Matrix,
    /// `H x P`
    pub w2: Matrix,
    /// `1 x P`
    pub b2: Matrix,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let ModelDims {
            modulus: p,
            embed_dim: d,
            hidden: h,
        } = dims;
        Self {
            embedding: Matrix::zeros(p, d),
            w1: Matrix::zeros(2 * d, h),
            b1: Matrix::zeros(1, h),
            w2: Matrix::zeros(h, p),
            b2: Matrix::zeros(1, p),
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            modulus: self.embedding.rows(),
            embed_dim: self.embedding.cols(),
            hidden: self.b1.cols(),
        }
    }

    /// Checks that every tensor agrees with `dims()`.
    pub fn check_shapes(&self) -> Result<()> {
        let expected = Self::zeros(self.dims());
        for ((name, have), (_, want)) in self.named().iter().zip(expected.named().iter()) {
            if have.shape() != want.shape() {
                return Err(Error::Shape {
                    op: name,
                    left: have.shape(),
                    right: want.shape(),
                });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &Matrix); 5] {
        [
            ("embedding", &self.embedding),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
        ]
    }

    pub fn named_mut(&mut self) -> [(&'static str, &mut Matrix); 5] {
        [
            ("embedding", &mut self.embedding),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
        ]
    }

    /// Group each tensor belongs to, parallel to [`Self::named`].
    pub const GROUPS: [Group; 5] = [
        Group::Embedding,
        Group::Hidden,
        Group::Hidden,
        Group::Output,
        Group::Output,
    ];

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, m)| m.is_finite())
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, m)| m.len()).sum()
    }
}

/// Architectural and training ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    /// Apply ReLU to embedding rows before concatenation.
    #[serde(default)]
    pub relu_after_embedding: bool,
    /// Exclude the embedding table from updates.
    #[serde(default)]
    pub freeze_embedding: bool,
    /// Exclude W1, b1, W2, b2 from updates.
    #[serde(default)]
    pub freeze_non_embedding: bool,
}

impl Variant {
    pub fn is_frozen(&self, group: Group) -> bool {
        match group {
            Group::Embedding => self.freeze_embedding,
            Group::Hidden | Group::Output => self.freeze_non_embedding,
        }
    }
}

/// Where dropout masks are applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutPlacement {
    /// Post-ReLU hidden activations only.
    #[default]
    Hidden,
    /// Hidden activations and the concatenated embedding vector.
    HiddenAndEmbedding,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    #[serde(default)]
    pub placement: DropoutPlacement,
}

impl DropoutSpec {
    pub fn hidden(rate: f64) -> Self {
        Self {
            rate,
            placement: DropoutPlacement::Hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::InvalidRate(self.rate));
        }
        Ok(())
    }

    /// Whether masks are drawn at all; a zero rate is the identity.
    pub fn is_active(&self) -> bool {
        self.rate > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dims_and_shapes() {
        let p = ModelParams::zeros(ModelDims::default());
        assert_eq!(p.embedding.shape(), (53, 128));
        assert_eq!(p.w1.shape(), (256, 256));
        assert_eq!(p.b1.shape(), (1, 256));
        assert_eq!(p.w2.shape(), (256, 53));
        assert_eq!(p.b2.shape(), (1, 53));
        assert_eq!(p.dims(), ModelDims::default());
        p.check_shapes().unwrap();
    }

    #[test]
    fn shape_check_catches_corruption() {
        let mut p = ModelParams::zeros(ModelDims::default());
        p.w2 = Matrix::zeros(256, 52);
        assert!(matches!(p.check_shapes(), Err(Error::Shape { op: "w2", .. })));
    }

    #[test]
    fn dropout_rate_bounds() {
        assert!(DropoutSpec::hidden(0.0).validate().is_ok());
        assert!(DropoutSpec::hidden(0.9).validate().is_ok());
        assert!(matches!(DropoutSpec::hidden(1.0).validate(), Err(Error::InvalidRate(_))));
        assert!(DropoutSpec::hidden(-0.1).validate().is_err());
    }

    #[test]
    fn freeze_flags_map_to_groups() {
        let v = Variant {
            freeze_embedding: true,
            ..Variant::default()
        };
        assert!(v.is_frozen(Group::Embedding));
        assert!(!v.is_frozen(Group::Hidden));
        let v = Variant {
            freeze_non_embedding: true,
            ..Variant::default()
        };
        assert!(!v.is_frozen(Group::Embedding));
        assert!(v.is_frozen(Group::Output));
    }
}
