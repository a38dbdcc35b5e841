use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::scalar::Scalar;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; caches what backward needs.
    Train,
    /// Running statistics.
    Infer,
}

/// Per-channel batch normalisation over every axis but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: T,
    pub momentum: T,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: T::lit(BN_EPS),
            momentum: T::lit(BN_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
        let c = self.channels();
        if x.channels() != c || x.shape().len() < 2 {
            return Err(Error::Shape(format!("batchnorm over {c} channels got shape {:?}", x.shape())));
        }
        let m = x.len() / c;
        match mode {
            Mode::Infer => {
                let scale: Vec<T> = (0..c)
                    .map(|ch| self.gamma[ch] / (self.running_var[ch] + self.eps).sqrt())
                    .collect();
                let mut y = x.clone();
                for row in y.data_mut().chunks_exact_mut(c) {
                    for ch in 0..c {
                        row[ch] = (row[ch] - self.running_mean[ch]) * scale[ch] + self.beta[ch];
                    }
                }
                Ok((y, None))
            }
            Mode::Train => {
                if x.shape()[0] < 2 {
                    return Err(Error::InvalidArgument("train-mode batchnorm needs a batch of at least 2".into()));
                }
                let inv_m = T::one() / T::lit(m as f64);
                let mut mean = vec![T::zero(); c];
                for row in x.data().chunks_exact(c) {
                    for ch in 0..c {
                        mean[ch] = mean[ch] + row[ch];
                    }
                }
                mean.iter_mut().for_each(|v| *v = *v * inv_m);
                let mut var = vec![T::zero(); c];
                for row in x.data().chunks_exact(c) {
                    for ch in 0..c {
                        let d = row[ch] - mean[ch];
                        var[ch] = var[ch] + d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v = *v * inv_m);
                let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();
                let mut x_hat = x.data().to_vec();
                let mut y = Tensor::zeros(x.shape());
                for (xh, yr) in x_hat.chunks_exact_mut(c).zip(y.data_mut().chunks_exact_mut(c)) {
                    for ch in 0..c {
                        xh[ch] = (xh[ch] - mean[ch]) * inv_std[ch];
                        yr[ch] = self.gamma[ch] * xh[ch] + self.beta[ch];
                    }
                }
                Ok((
                    y,
                    Some(BatchNormCache {
                        x_hat,
                        inv_std,
                        batch_mean: mean,
                        batch_var: var,
                        shape: x.shape().to_vec(),
                    }),
                ))
            }
        }
    }

    /// `r ← momentum·r + (1 − momentum)·batch_stat` for mean and variance.
    pub fn update_running(&mut self, cache: &BatchNormCache<T>) {
        let keep = self.momentum;
        let take = T::one() - keep;
        for ch in 0..self.channels() {
            self.running_mean[ch] = keep * self.running_mean[ch] + take * cache.batch_mean[ch];
            self.running_var[ch] = keep * self.running_var[ch] + take * cache.batch_var[ch];
        }
    }

    /// Full batch-statistics chain rule for a train-mode forward pass.
    pub fn backward(&self, cache: &BatchNormCache<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, BatchNormGrads<T>)> {
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(Error::Shape(format!("batchnorm grad {:?} vs {:?}", grad_out.shape(), cache.shape)));
        }
        let c = self.channels();
        let m = grad_out.len() / c;
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for (g, xh) in grad_out.data().chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
            for ch in 0..c {
                dbeta[ch] = dbeta[ch] + g[ch];
                dgamma[ch] = dgamma[ch] + g[ch] * xh[ch];
            }
        }
        // dx = γ·inv_std/m · (m·g − Σg − x̂·Σ(g·x̂))
        let mf = T::lit(m as f64);
        let coef: Vec<T> = (0..c).map(|ch| self.gamma[ch] * cache.inv_std[ch] / mf).collect();
        let mut gx = Tensor::zeros(&cache.shape);
        for ((dst, g), xh) in gx
            .data_mut()
            .chunks_exact_mut(c)
            .zip(grad_out.data().chunks_exact(c))
            .zip(cache.x_hat.chunks_exact(c))
        {
            for ch in 0..c {
                dst[ch] = coef[ch] * (mf * g[ch] - dbeta[ch] - xh[ch] * dgamma[ch]);
            }
        }
        Ok((
            gx,
            BatchNormGrads {
                gamma: dgamma,
                beta: dbeta,
            },
        ))
    }
}
