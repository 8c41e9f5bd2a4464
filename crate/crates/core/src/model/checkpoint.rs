//! `GROKLAB1` checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"GROKLAB1" | P: u32 | d: u32 | H: u32 | E | W1 | b1 | W2 | b2
//! ```
//!
//! Tensors are row-major `f64`. Sizes follow from `(P, d, H)`, so the file
//! carries no other framing.

use std::fs;
use std::path::Path;

use super::{ModelDims, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GROKLAB1";

impl ModelParams {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(20 + 8 * self.num_parameters());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        for v in [dims.modulus, dims.embed_dim, dims.hidden] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for (_, m) in self.named() {
            for x in m.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("missing GROKLAB1 header".into()));
        }
        let word = |k: usize| {
            let off = 8 + 4 * k;
            u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
        };
        let dims = ModelDims {
            modulus: word(0),
            embed_dim: word(1),
            hidden: word(2),
        };
        dims.validate()
            .map_err(|e| Error::Checkpoint(format!("bad dimensions: {e}")))?;
        let mut params = ModelParams::zeros(dims);
        let expected = 20 + 8 * params.num_parameters();
        if bytes.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} bytes for {dims:?}, found {}",
                bytes.len()
            )));
        }
        let mut chunks = bytes[20..].chunks_exact(8);
        for (_, m) in params.named_mut() {
            fill(m, &mut chunks);
        }
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(params)
    }
}

fn fill(m: &mut Matrix, chunks: &mut std::slice::ChunksExact<'_, u8>) {
    for x in m.data_mut() {
        *x = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
    }
}

pub fn write_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, params.to_checkpoint_bytes())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    ModelParams::from_checkpoint_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, InitSpec};
    use crate::numerics::RngStream;

    fn small() -> ModelParams {
        let dims = ModelDims {
            modulus: 5,
            embed_dim: 3,
            hidden: 4,
        };
        init_params(dims, &InitSpec::default(), &RngStream::new(1, "ck")).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = small().to_checkpoint_bytes();
        assert_eq!(&bytes[..8], b"GROKLAB1");
        assert_eq!(&bytes[8..20], &[5, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0]);
        // E 5x3, W1 6x4, b1 4, W2 4x5, b2 5
        assert_eq!(bytes.len(), 20 + 8 * (15 + 24 + 4 + 20 + 5));
        let first = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        assert_eq!(first, small().embedding.get(0, 0));
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let p = small();
        let bytes = p.to_checkpoint_bytes();
        let q = ModelParams::from_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(p, q);
        assert_eq!(bytes, q.to_checkpoint_bytes());
    }

    #[test]
    fn truncated_and_foreign_files_rejected() {
        let bytes = small().to_checkpoint_bytes();
        assert!(ModelParams::from_checkpoint_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ModelParams::from_checkpoint_bytes(&bad).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        write_checkpoint(&path, &small()).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), small());
        assert!(matches!(
            read_checkpoint(&dir.path().join("nope.bin")),
            Err(Error::MissingFile(_))
        ));
    }
}
