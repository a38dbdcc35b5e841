use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::scalar::Scalar;

/// Fully connected layer `y = x·W + b` with `W` stored `(n_in, n_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[n_in, n_out]),
            bias: vec![T::zero(); n_out],
        }
    }

    pub fn new(weights: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        let [_, n_out] = weights.dims2()?;
        if bias.len() != n_out {
            return Err(Error::Shape(format!("bias of {} for {n_out} outputs", bias.len())));
        }
        Ok(Self { weights, bias })
    }

    pub fn n_in(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.weights.shape()[1]
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<usize> {
        let [b, n] = x.dims2()?;
        if n != self.n_in() {
            return Err(Error::Shape(format!("dense expects {} inputs, got {n}", self.n_in())));
        }
        Ok(b)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let b = self.check_input(x)?;
        let (n_in, n_out) = (self.n_in(), self.n_out());
        let mut y = Tensor::zeros(&[b, n_out]);
        for row in y.data_mut().chunks_exact_mut(n_out) {
            row.copy_from_slice(&self.bias);
        }
        T::gemm(b, n_in, n_out, x.data(), (n_in, 1), self.weights.data(), (n_out, 1), T::one(), y.data_mut(), (n_out, 1));
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, DenseGrads<T>)> {
        let b = self.check_input(x)?;
        let (n_in, n_out) = (self.n_in(), self.n_out());
        if grad_out.shape() != [b, n_out] {
            return Err(Error::Shape(format!("dense grad shape {:?}", grad_out.shape())));
        }
        let g = grad_out.data();
        let mut gw = vec![T::zero(); n_in * n_out];
        T::gemm(n_in, b, n_out, x.data(), (1, n_in), g, (n_out, 1), T::zero(), &mut gw, (n_out, 1));
        let mut gb = vec![T::zero(); n_out];
        for row in g.chunks_exact(n_out) {
            for (acc, &v) in gb.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        let mut gx = Tensor::zeros(&[b, n_in]);
        T::gemm(b, n_out, n_in, g, (n_out, 1), self.weights.data(), (1, n_out), T::zero(), gx.data_mut(), (n_in, 1));
        Ok((gx, DenseGrads { weights: gw, bias: gb }))
    }
}
