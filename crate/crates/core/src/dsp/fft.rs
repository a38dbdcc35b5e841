use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Precomputed in-place radix-2 FFT for one power-of-two length.
#[derive(Debug, Clone)]
pub struct Radix2Fft<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<usize>,
}

impl<T: Scalar> Radix2Fft<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("FFT length must be a power of two ≥ 2, got {n}")));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let ang = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(T::lit(ang.cos()), T::lit(ang.sin()))
            })
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward transform, `X_k = Σ x_n e^{-2πikn/N}`.
    pub fn process(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.n, "FFT buffer length");
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= self.n {
            let half = size / 2;
            let step = self.n / size;
            for chunk in buf.chunks_exact_mut(size) {
                let (lo, hi) = chunk.split_at_mut(half);
                for k in 0..half {
                    let t = hi[k] * self.twiddles[k * step];
                    hi[k] = lo[k] - t;
                    lo[k] = lo[k] + t;
                }
            }
            size *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let n = 32;
        let fft = Radix2Fft::<f64>::new(n).unwrap();
        let x: Vec<Complex<f64>> = (0..n).map(|i| Complex::new((i as f64 * 0.7).sin(), (i as f64).cos())).collect();
        let mut y = x.clone();
        fft.process(&mut y);
        for (k, yk) in y.iter().enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate() {
                acc += xj * Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64);
            }
            assert!((acc - yk).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Radix2Fft::<f32>::new(100).is_err());
        assert!(Radix2Fft::<f32>::new(1).is_err());
    }
}
