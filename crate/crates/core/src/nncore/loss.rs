use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct XentOutput<T> {
    pub loss: T,
    pub probs: Tensor<T>,
    pub grad_logits: Tensor<T>,
}

/// Row-wise softmax with the max subtracted first.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let [_, k] = logits.dims2()?;
    let mut probs = logits.clone();
    for row in probs.data_mut().chunks_exact_mut(k) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z = z + *v;
        }
        for v in row.iter_mut() {
            *v = *v / z;
        }
    }
    Ok(probs)
}

/// Mean cross-entropy of softmax probabilities against integer labels.
///
/// With `sample_weights`, the loss is `Σ wᵢ ℓᵢ / Σ wᵢ` and the gradient is
/// weighted to match; without, every sample weighs 1.
pub fn softmax_xent<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
    sample_weights: Option<&[T]>,
) -> Result<XentOutput<T>> {
    let [b, k] = logits.dims2()?;
    if labels.len() != b {
        return Err(Error::Shape(format!("{} labels for {b} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidLabel(format!("label {bad} outside 0..{k}")));
    }
    let weights: Vec<T> = match sample_weights {
        Some(w) if w.len() == b => w.to_vec(),
        Some(w) => return Err(Error::Shape(format!("{} weights for {b} rows", w.len()))),
        None => vec![T::one(); b],
    };
    let total_w = weights.iter().copied().fold(T::zero(), |a, v| a + v);
    let probs = softmax_rows(logits)?;
    let mut grad = probs.clone();
    let mut loss = T::zero();
    for (i, (row, &label)) in logits.data().chunks_exact(k).zip(labels).enumerate() {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).fold(T::zero(), |a, v| a + v).ln();
        loss = loss + weights[i] * (lse - row[label]);
        let g = &mut grad.data_mut()[i * k..(i + 1) * k];
        g[label] = g[label] - T::one();
        for v in g.iter_mut() {
            *v = *v * weights[i] / total_w;
        }
    }
    Ok(XentOutput {
        loss: loss / total_w,
        probs,
        grad_logits: grad,
    })
}
