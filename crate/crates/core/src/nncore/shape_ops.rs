use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::scalar::Scalar;

/// Concatenates along the trailing (channel) axis.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (ra, rb) = (a.shape().len(), b.shape().len());
    if ra == 0 || ra != rb || a.shape()[..ra - 1] != b.shape()[..rb - 1] {
        return Err(Error::Shape(format!("cannot concat {:?} with {:?}", a.shape(), b.shape())));
    }
    let (ca, cb) = (a.channels(), b.channels());
    let mut shape = a.shape().to_vec();
    shape[ra - 1] = ca + cb;
    let rows: usize = a.shape()[..ra - 1].iter().product();
    let mut data = Vec::with_capacity(rows * (ca + cb));
    for r in 0..rows {
        data.extend_from_slice(&a.data()[r * ca..(r + 1) * ca]);
        data.extend_from_slice(&b.data()[r * cb..(r + 1) * cb]);
    }
    Tensor::from_vec(&shape, data)
}

/// Inverse of [`concat_channels`]: the first `c1` channels, then the rest.
pub fn split_channels<T: Scalar>(x: &Tensor<T>, c1: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let c = x.channels();
    if c1 > c || x.shape().is_empty() {
        return Err(Error::Shape(format!("cannot split {c1} channels from {:?}", x.shape())));
    }
    let rank = x.shape().len();
    let rows = x.len() / c.max(1);
    let (mut sa, mut sb) = (x.shape().to_vec(), x.shape().to_vec());
    sa[rank - 1] = c1;
    sb[rank - 1] = c - c1;
    let mut a = Vec::with_capacity(rows * c1);
    let mut b = Vec::with_capacity(rows * (c - c1));
    for r in 0..rows {
        let row = &x.data()[r * c..(r + 1) * c];
        a.extend_from_slice(&row[..c1]);
        b.extend_from_slice(&row[c1..]);
    }
    Ok((Tensor::from_vec(&sa, a)?, Tensor::from_vec(&sb, b)?))
}

/// `(batch, …) → (batch, product of the rest)`, row-major order preserved.
pub fn flatten<T: Scalar>(x: Tensor<T>) -> Result<Tensor<T>> {
    let b = *x
        .shape()
        .first()
        .ok_or_else(|| Error::Shape("cannot flatten a scalar".into()))?;
    let rest = if b == 0 { 0 } else { x.len() / b };
    x.reshape(&[b, rest])
}

pub fn unflatten<T: Scalar>(x: Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    x.reshape(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn concat_model_branches() {
        let a = Tensor::<f32>::zeros(&[1, 129, 32, 16]);
        let b = Tensor::<f32>::zeros(&[1, 129, 32, 32]);
        assert_eq!(concat_channels(&a, &b).unwrap().shape(), &[1, 129, 32, 48]);
        assert!(concat_channels(&a, &Tensor::zeros(&[1, 129, 31, 32])).is_err());
    }

    #[test]
    fn concat_with_empty_channels() {
        let a = Tensor::from_vec(&[2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(concat_channels(&a, &Tensor::zeros(&[2, 0])).unwrap(), a);
    }

    #[test]
    fn flatten_shapes() {
        let x = Tensor::<f32>::zeros(&[1, 129, 32, 48]);
        assert_eq!(flatten(x).unwrap().shape(), &[1, 198_144]);
        let one = Tensor::from_vec(&[1, 1, 1, 1], vec![3.5f64]).unwrap();
        assert_eq!(flatten(one).unwrap().data(), &[3.5]);
    }

    proptest! {
        #[test]
        fn split_undoes_concat(rows in 1usize..6, c1 in 0usize..4, c2 in 0usize..4, seed in any::<u32>()) {
            let fill = |n: usize, off: u32| (0..n).map(|i| ((i as u32 ^ seed ^ off) % 97) as f64 - 48.0).collect::<Vec<_>>();
            let a = Tensor::from_vec(&[rows, 2, c1], fill(rows * 2 * c1, 1)).unwrap();
            let b = Tensor::from_vec(&[rows, 2, c2], fill(rows * 2 * c2, 2)).unwrap();
            let (sa, sb) = split_channels(&concat_channels(&a, &b).unwrap(), c1).unwrap();
            prop_assert_eq!(sa, a);
            prop_assert_eq!(sb, b);
        }

        #[test]
        fn flatten_round_trip(dims in prop::collection::vec(1usize..5, 4)) {
            let n: usize = dims.iter().product();
            let x = Tensor::from_vec(&dims, (0..n).map(|i| i as f32 * 0.25).collect()).unwrap();
            let back = unflatten(flatten(x.clone()).unwrap(), &dims).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
