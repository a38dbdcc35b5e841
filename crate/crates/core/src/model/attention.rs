use crate::error::{Error, Result};
use crate::nncore::{relu, relu_backward, sigmoid, Dense, DenseGrads, Tensor};
use crate::scalar::Scalar;

/// Per-frequency gating: each bin's map is squeezed to its mean over time and
/// channels, passed through `dense → ReLU → dense → sigmoid`, and the result
/// rescales that bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAttention<T> {
    pub squeeze: Dense<T>,
    pub excite: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    descriptor: Tensor<T>,
    hidden: Tensor<T>,
    /// Gate values, `batch × freq`.
    pub weights: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads<T> {
    pub squeeze: DenseGrads<T>,
    pub excite: DenseGrads<T>,
}

impl<T: Scalar> SpectralAttention<T> {
    pub fn zeros(freq_bins: usize, hidden: usize) -> Self {
        Self {
            squeeze: Dense::zeros(freq_bins, hidden),
            excite: Dense::zeros(hidden, freq_bins),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, AttentionCache<T>)> {
        let [b, f, t, c] = x.dims4()?;
        if f != self.squeeze.n_in() {
            return Err(Error::Shape(format!("attention over {} bins got {f}", self.squeeze.n_in())));
        }
        let per_bin = t * c;
        let inv = T::one() / T::lit(per_bin as f64);
        let descriptor: Vec<T> = x
            .data()
            .chunks_exact(per_bin)
            .map(|cell| cell.iter().copied().fold(T::zero(), |a, v| a + v) * inv)
            .collect();
        let descriptor = Tensor::from_vec(&[b, f], descriptor)?;
        let hidden = relu(&self.squeeze.forward(&descriptor)?);
        let weights = self.excite.forward(&hidden)?.map(sigmoid);
        let mut y = x.clone();
        for (cell, &w) in y.data_mut().chunks_exact_mut(per_bin).zip(weights.data()) {
            cell.iter_mut().for_each(|v| *v = *v * w);
        }
        Ok((
            y,
            AttentionCache {
                descriptor,
                hidden,
                weights,
            },
        ))
    }

    pub fn backward(
        &self,
        x: &Tensor<T>,
        cache: &AttentionCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, AttentionGrads<T>)> {
        let [b, f, t, c] = x.dims4()?;
        if grad_out.shape() != x.shape() {
            return Err(Error::Shape("attention grad shape".into()));
        }
        let per_bin = t * c;
        let w = cache.weights.data();
        let mut g_gate = vec![T::zero(); b * f];
        for (i, (gc, xc)) in grad_out
            .data()
            .chunks_exact(per_bin)
            .zip(x.data().chunks_exact(per_bin))
            .enumerate()
        {
            let gw = gc.iter().zip(xc).fold(T::zero(), |a, (&g, &v)| a + g * v);
            g_gate[i] = gw * w[i] * (T::one() - w[i]);
        }
        let g_gate = Tensor::from_vec(&[b, f], g_gate)?;
        let (g_hidden, excite) = self.excite.backward(&cache.hidden, &g_gate)?;
        let g_hidden = relu_backward(&cache.hidden, &g_hidden)?;
        let (g_desc, squeeze) = self.squeeze.backward(&cache.descriptor, &g_hidden)?;

        let inv = T::one() / T::lit(per_bin as f64);
        let mut gx = grad_out.clone();
        for (i, cell) in gx.data_mut().chunks_exact_mut(per_bin).enumerate() {
            let spread = g_desc.data()[i] * inv;
            cell.iter_mut().for_each(|v| *v = *v * w[i] + spread);
        }
        Ok((gx, AttentionGrads { squeeze, excite }))
    }
}
