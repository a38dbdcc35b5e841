use crate::dsp::FeatureSet;
use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::scalar::Scalar;

/// Per-input-channel z-score fitted on training features.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardization<T> {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            std: vec![T::one(); channels],
        }
    }

    /// Mean and population standard deviation over every record, bin and
    /// frame. A channel with no spread keeps a unit scale.
    pub fn fit(set: &FeatureSet<T>) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Dataset("cannot fit standardization on an empty set".into()));
        }
        let c = set.dims[2];
        let mut sum = vec![0.0f64; c];
        let mut count = 0usize;
        for row in set.data.chunks_exact(c) {
            for ch in 0..c {
                sum[ch] += row[ch].as_f64();
            }
            count += 1;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0f64; c];
        for row in set.data.chunks_exact(c) {
            for ch in 0..c {
                let d = row[ch].as_f64() - mean[ch];
                sq[ch] += d * d;
            }
        }
        let std: Vec<f64> = sq
            .iter()
            .map(|s| (s / count as f64).sqrt())
            .map(|s| if s.is_finite() && s > 1e-12 { s } else { 1.0 })
            .collect();
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("training features contain NaN or infinity".into()));
        }
        Ok(Self {
            mean: mean.into_iter().map(T::lit).collect(),
            std: std.into_iter().map(T::lit).collect(),
        })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &mut Tensor<T>) -> Result<()> {
        let c = self.channels();
        if x.channels() != c {
            return Err(Error::Shape(format!("standardization over {c} channels got {:?}", x.shape())));
        }
        let inv: Vec<T> = self.std.iter().map(|&s| T::one() / s).collect();
        for row in x.data_mut().chunks_exact_mut(c) {
            for ch in 0..c {
                row[ch] = (row[ch] - self.mean[ch]) * inv[ch];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ClassLabel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standardized_training_set_is_zero_mean_unit_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut set = FeatureSet::<f64>::new([4, 3, 2]);
        for _ in 0..10 {
            let rec: Vec<f64> = (0..24)
                .map(|i| if i % 2 == 0 { -80.0 + 30.0 * rng.gen::<f64>() } else { rng.gen_range(-2.0..2.0) })
                .collect();
            set.push_raw(&rec, ClassLabel::Normal).unwrap();
        }
        let st = Standardization::fit(&set).unwrap();
        let mut x = Tensor::from_vec(&[10, 4, 3, 2], set.data.clone()).unwrap();
        st.apply(&mut x).unwrap();
        for ch in 0..2 {
            let v: Vec<f64> = x.data().iter().skip(ch).step_by(2).copied().collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let s = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            assert!(m.abs() <= 1e-6 && (s - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn constant_channel_keeps_unit_scale() {
        let mut set = FeatureSet::<f32>::new([1, 1, 2]);
        set.push_raw(&[1.0, 0.0], ClassLabel::Als).unwrap();
        set.push_raw(&[3.0, 0.0], ClassLabel::Als).unwrap();
        let st = Standardization::fit(&set).unwrap();
        assert_eq!(st.std[1], 1.0);
        assert!(st.std.iter().all(|&s| s > 0.0));
        assert!(Standardization::fit(&FeatureSet::<f32>::new([1, 1, 2])).is_err());
    }
}
