use crate::error::Result;
use crate::nncore::{
    relu, relu_backward, BatchNorm, BatchNormCache, BatchNormGrads, Conv2d, Conv2dGrads, Mode, Tensor,
};
use crate::scalar::Scalar;

/// Two 3×3 conv/BN stages with a 1×1 projected shortcut.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock<T> {
    pub conv1: Conv2d<T>,
    pub bn1: BatchNorm<T>,
    pub conv2: Conv2d<T>,
    pub bn2: BatchNorm<T>,
    pub proj: Conv2d<T>,
}

#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    hidden: Tensor<T>,
    pub(crate) bn1: BatchNormCache<T>,
    pub(crate) bn2: BatchNormCache<T>,
    out: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads<T> {
    pub conv1: Conv2dGrads<T>,
    pub bn1: BatchNormGrads<T>,
    pub conv2: Conv2dGrads<T>,
    pub bn2: BatchNormGrads<T>,
    pub proj: Conv2dGrads<T>,
}

impl<T: Scalar> FeatureBlock<T> {
    pub fn zeros(kh: usize, kw: usize, c_in: usize, c_out: usize) -> Result<Self> {
        Ok(Self {
            conv1: Conv2d::zeros(kh, kw, c_in, c_out)?,
            bn1: BatchNorm::new(c_out),
            conv2: Conv2d::zeros(kh, kw, c_out, c_out)?,
            bn2: BatchNorm::new(c_out),
            proj: Conv2d::zeros(1, 1, c_in, c_out)?,
        })
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BlockCache<T>>)> {
        let (n1, c1) = self.bn1.forward(&self.conv1.forward(x)?, mode)?;
        let hidden = relu(&n1);
        let (n2, c2) = self.bn2.forward(&self.conv2.forward(&hidden)?, mode)?;
        let out = relu(&n2.add(&self.proj.forward(x)?)?);
        let cache = match (c1, c2) {
            (Some(bn1), Some(bn2)) => Some(BlockCache {
                hidden,
                bn1,
                bn2,
                out: out.clone(),
            }),
            _ => None,
        };
        Ok((out, cache))
    }

    pub fn backward(&self, x: &Tensor<T>, cache: &BlockCache<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, BlockGrads<T>)> {
        let g_sum = relu_backward(&cache.out, grad_out)?;
        let (g_a2, bn2) = self.bn2.backward(&cache.bn2, &g_sum)?;
        let (g_hidden, conv2) = self.conv2.backward(&cache.hidden, &g_a2, true)?;
        let g_n1 = relu_backward(&cache.hidden, &g_hidden.expect("requested"))?;
        let (g_a1, bn1) = self.bn1.backward(&cache.bn1, &g_n1)?;
        let (gx_main, conv1) = self.conv1.backward(x, &g_a1, true)?;
        let (gx_skip, proj) = self.proj.backward(x, &g_sum, true)?;
        let gx = gx_main.expect("requested").add(&gx_skip.expect("requested"))?;
        Ok((gx, BlockGrads { conv1, bn1, conv2, bn2, proj }))
    }

    pub(crate) fn update_running(&mut self, cache: &BlockCache<T>) {
        self.bn1.update_running(&cache.bn1);
        self.bn2.update_running(&cache.bn2);
    }
}
