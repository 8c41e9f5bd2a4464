use std::borrow::Cow;

use super::{DropoutPlacement, DropoutSpec, Gradients, Group, ModelParams, Variant};
use crate::error::{Error, Result};
use crate::numerics::matrix::gemm;
use crate::numerics::{Matrix, RngStream};

/// Everything `backward` needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub tokens: Vec<(usize, usize)>,
    /// `B x 2d` concatenated embeddings after the optional ReLU and mask.
    pub embedded: Matrix,
    /// `B x H` hidden pre-activations.
    pub pre_activation: Matrix,
    /// `B x H` hidden activations after ReLU and the optional mask.
    pub hidden: Matrix,
    /// `B x 2d`, entries 0 or `1/(1-p)`.
    pub embedding_mask: Option<Matrix>,
    /// `B x H`, entries 0 or `1/(1-p)`.
    pub hidden_mask: Option<Matrix>,
    /// `B x P`
    pub logits: Matrix,
}

impl ForwardTrace {
    pub fn batch_size(&self) -> usize {
        self.tokens.len()
    }
}

/// The embedding table as seen by the hidden layer.
fn input_table<'a>(params: &'a ModelParams, variant: &Variant) -> Cow<'a, Matrix> {
    if variant.relu_after_embedding {
        let mut t = params.embedding.clone();
        t.map_inplace(|x| x.max(0.0));
        Cow::Owned(t)
    } else {
        Cow::Borrowed(&params.embedding)
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut RngStream) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("mask length")
}

fn apply_mask(target: &mut Matrix, mask: &Matrix) {
    for (x, m) in target.data_mut().iter_mut().zip(mask.data()) {
        *x *= m;
    }
}

/// Runs the network on a batch of token pairs.
///
/// With an active dropout spec the masks are drawn from `rng` in a fixed
/// order (embedding mask first, then hidden mask, each row-major). A rate
/// of zero draws nothing and is bit-identical to passing no dropout.
pub fn forward(
    params: &ModelParams,
    variant: &Variant,
    batch: &[(usize, usize)],
    dropout: Option<&DropoutSpec>,
    rng: Option<&mut RngStream>,
) -> Result<ForwardTrace> {
    forward_impl(params, variant, batch, dropout, rng, false)
}

pub(crate) fn forward_impl(
    params: &ModelParams,
    variant: &Variant,
    batch: &[(usize, usize)],
    dropout: Option<&DropoutSpec>,
    rng: Option<&mut RngStream>,
    force_dense_hidden: bool,
) -> Result<ForwardTrace> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dims = params.dims();
    let (p, d, h) = (dims.modulus, dims.embed_dim, dims.hidden);
    if let Some(&(a, b)) = batch.iter().find(|&&(a, b)| a >= p || b >= p) {
        return Err(Error::OutOfVocabulary {
            token: a.max(b),
            vocab: p,
        });
    }
    if let Some(spec) = dropout {
        spec.validate()?;
    }
    let active = dropout.copied().filter(DropoutSpec::is_active);
    let mut rng = match (active, rng) {
        (Some(_), None) => return Err(Error::MissingRng),
        (Some(_), Some(r)) => Some(r),
        (None, _) => None,
    };

    let n = batch.len();
    let table = input_table(params, variant);
    let mut embedded = Matrix::zeros(n, 2 * d);
    for (row, &(a, b)) in batch.iter().enumerate() {
        let dst = embedded.row_mut(row);
        dst[..d].copy_from_slice(table.row(a));
        dst[d..].copy_from_slice(table.row(b));
    }

    let embedding_mask = match (active, rng.as_deref_mut()) {
        (Some(spec), Some(r)) if spec.placement == DropoutPlacement::HiddenAndEmbedding => {
            let mask = dropout_mask(n, 2 * d, spec.rate, r);
            apply_mask(&mut embedded, &mask);
            Some(mask)
        }
        _ => None,
    };

    let mut pre_activation = Matrix::zeros(n, h);
    if embedding_mask.is_some() || force_dense_hidden {
        gemm(1.0, &embedded, false, &params.w1, false, 0.0, &mut pre_activation);
    } else {
        // Without an embedding mask the hidden input depends only on the
        // token, so project the P-row table once instead of every example.
        let proj_a = table.matmul(&params.w1.row_block(0, d))?;
        let proj_b = table.matmul(&params.w1.row_block(d, 2 * d))?;
        for (row, &(a, b)) in batch.iter().enumerate() {
            for ((z, x), y) in pre_activation
                .row_mut(row)
                .iter_mut()
                .zip(proj_a.row(a))
                .zip(proj_b.row(b))
            {
                *z = x + y;
            }
        }
    }
    pre_activation.add_row_broadcast(&params.b1)?;

    let mut hidden = pre_activation.clone();
    hidden.map_inplace(|x| x.max(0.0));
    let hidden_mask = match (active, rng) {
        (Some(spec), Some(r)) => {
            let mask = dropout_mask(n, h, spec.rate, r);
            apply_mask(&mut hidden, &mask);
            Some(mask)
        }
        _ => None,
    };

    let mut logits = Matrix::zeros(n, p);
    gemm(1.0, &hidden, false, &params.w2, false, 0.0, &mut logits);
    logits.add_row_broadcast(&params.b2)?;

    Ok(ForwardTrace {
        tokens: batch.to_vec(),
        embedded,
        pre_activation,
        hidden,
        embedding_mask,
        hidden_mask,
        logits,
    })
}

/// Row-wise softmax via max-shifted exponentials.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Shape {
            op: "labels",
            left: (rows, classes),
            right: (labels.len(), 1),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::OutOfVocabulary {
            token: bad,
            vocab: classes,
        });
    }
    Ok(())
}

/// Mean cross-entropy and argmax accuracy (ties to the lowest class).
pub fn loss_and_accuracy(logits: &Matrix, labels: &[usize]) -> Result<(f64, f64)> {
    if logits.rows() == 0 || labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_labels(labels, logits.rows(), logits.cols())?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
    }
    for (pred, &y) in logits.argmax_rows().into_iter().zip(labels) {
        correct += usize::from(pred == y);
    }
    let n = labels.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Exact gradients of the mean cross-entropy of `trace.logits`.
///
/// Frozen groups get zero gradients. Dropout masks stored in the trace are
/// reused as-is.
pub fn backward(
    params: &ModelParams,
    variant: &Variant,
    trace: &ForwardTrace,
    labels: &[usize],
) -> Result<Gradients> {
    let dims = params.dims();
    let (p, d, h) = (dims.modulus, dims.embed_dim, dims.hidden);
    let n = trace.batch_size();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    for (op, m, want) in [
        ("trace.logits", &trace.logits, (n, p)),
        ("trace.hidden", &trace.hidden, (n, h)),
        ("trace.pre_activation", &trace.pre_activation, (n, h)),
        ("trace.embedded", &trace.embedded, (n, 2 * d)),
    ] {
        if m.shape() != want {
            return Err(Error::Shape {
                op,
                left: m.shape(),
                right: want,
            });
        }
    }
    check_labels(labels, n, p)?;

    let mut grads = ModelParams::zeros(dims);

    let mut dlogits = softmax_rows(&trace.logits);
    for (r, &y) in labels.iter().enumerate() {
        dlogits.row_mut(r)[y] -= 1.0;
    }
    dlogits.scale(1.0 / n as f64);

    if !variant.is_frozen(Group::Output) {
        gemm(1.0, &trace.hidden, true, &dlogits, false, 0.0, &mut grads.w2);
        grads.b2 = dlogits.column_sums();
    }
    if variant.is_frozen(Group::Hidden) && variant.is_frozen(Group::Embedding) {
        return Ok(grads);
    }

    let mut dpre = Matrix::zeros(n, h);
    gemm(1.0, &dlogits, false, &params.w2, true, 0.0, &mut dpre);
    if let Some(mask) = &trace.hidden_mask {
        apply_mask(&mut dpre, mask);
    }
    for (g, z) in dpre.data_mut().iter_mut().zip(trace.pre_activation.data()) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }

    let train_hidden = !variant.is_frozen(Group::Hidden);
    let train_embedding = !variant.is_frozen(Group::Embedding);
    if train_hidden {
        grads.b1 = dpre.column_sums();
    }

    let mut dtable = Matrix::zeros(p, d);
    if let Some(mask) = &trace.embedding_mask {
        if train_hidden {
            gemm(1.0, &trace.embedded, true, &dpre, false, 0.0, &mut grads.w1);
        }
        if train_embedding {
            let mut dx = Matrix::zeros(n, 2 * d);
            gemm(1.0, &dpre, false, &params.w1, true, 0.0, &mut dx);
            apply_mask(&mut dx, mask);
            for (row, &(a, b)) in trace.tokens.iter().enumerate() {
                let src = dx.row(row);
                for (t, s) in dtable.row_mut(a).iter_mut().zip(&src[..d]) {
                    *t += s;
                }
                for (t, s) in dtable.row_mut(b).iter_mut().zip(&src[d..]) {
                    *t += s;
                }
            }
        }
    } else {
        // Aggregate hidden-layer error signals per token, then every
        // remaining product is over the P-row table.
        let mut by_first = Matrix::zeros(p, h);
        let mut by_second = Matrix::zeros(p, h);
        for (row, &(a, b)) in trace.tokens.iter().enumerate() {
            let src = dpre.row(row);
            for (t, s) in by_first.row_mut(a).iter_mut().zip(src) {
                *t += s;
            }
            for (t, s) in by_second.row_mut(b).iter_mut().zip(src) {
                *t += s;
            }
        }
        let table = input_table(params, variant);
        if train_hidden {
            let mut top = Matrix::zeros(d, h);
            let mut bottom = Matrix::zeros(d, h);
            gemm(1.0, &table, true, &by_first, false, 0.0, &mut top);
            gemm(1.0, &table, true, &by_second, false, 0.0, &mut bottom);
            grads.w1.set_row_block(0, &top);
            grads.w1.set_row_block(d, &bottom);
        }
        if train_embedding {
            gemm(1.0, &by_first, false, &params.w1.row_block(0, d), true, 0.0, &mut dtable);
            gemm(1.0, &by_second, false, &params.w1.row_block(d, 2 * d), true, 1.0, &mut dtable);
        }
    }

    if train_embedding {
        if variant.relu_after_embedding {
            for (g, e) in dtable.data_mut().iter_mut().zip(params.embedding.data()) {
                if *e <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        grads.embedding = dtable;
    }
    Ok(grads)
}
