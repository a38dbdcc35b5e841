use std::fmt;
use std::str::FromStr;

use crate::dsp::{Spectrogram, Stft};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Magnitudes below this are clamped before taking decibels (−200 dB).
pub const DB_FLOOR_AMPLITUDE: f64 = 1e-10;
pub const FEATURE_CHANNELS: usize = 2;

/// How the rate-of-change channel is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    /// Least-squares slope over `width` frames, edges replicated.
    Regression { width: usize },
    /// Backward difference `c_t − c_{t−1}`, first frame 0.
    Difference,
}

impl Default for DeltaMode {
    fn default() -> Self {
        DeltaMode::Regression { width: 9 }
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaMode::Regression { .. } => f.write_str("regression"),
            DeltaMode::Difference => f.write_str("difference"),
        }
    }
}

impl FromStr for DeltaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "regression" => Ok(DeltaMode::default()),
            "difference" => Ok(DeltaMode::Difference),
            other => Err(Error::InvalidArgument(format!("unknown delta mode {other:?}"))),
        }
    }
}

/// Parameters of the feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub segment_len: usize,
    pub n_fft: usize,
    pub hop: usize,
    pub delta: DeltaMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            segment_len: crate::ingest::SEGMENT_LEN,
            n_fft: 256,
            hop: 64,
            delta: DeltaMode::default(),
        }
    }
}

impl FeatureConfig {
    /// `(freq_bins, frames, channels)` of the resulting tensor.
    pub fn dims(&self) -> [usize; 3] {
        [self.n_fft / 2 + 1, self.segment_len / self.hop + 1, FEATURE_CHANNELS]
    }
}

/// Stacked log spectrogram (channel 0) and its delta (channel 1), row-major
/// over `(freq, frame, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor<T> {
    pub values: Vec<T>,
    pub freq_bins: usize,
    pub frames: usize,
}

impl<T: Scalar> FeatureTensor<T> {
    pub fn shape(&self) -> [usize; 3] {
        [self.freq_bins, self.frames, FEATURE_CHANNELS]
    }

    #[inline]
    pub fn get(&self, bin: usize, frame: usize, channel: usize) -> T {
        self.values[(bin * self.frames + frame) * FEATURE_CHANNELS + channel]
    }

    pub fn stack(log: &Spectrogram<T>, delta: &Spectrogram<T>) -> Result<Self> {
        if (log.freq_bins, log.frames) != (delta.freq_bins, delta.frames) {
            return Err(Error::Shape("log and delta grids differ".into()));
        }
        let values = log
            .values
            .iter()
            .zip(&delta.values)
            .flat_map(|(&a, &b)| [a, b])
            .collect();
        Ok(Self {
            values,
            freq_bins: log.freq_bins,
            frames: log.frames,
        })
    }

    pub fn channel(&self, channel: usize) -> Spectrogram<T> {
        Spectrogram {
            values: self.values.iter().skip(channel).step_by(FEATURE_CHANNELS).copied().collect(),
            freq_bins: self.freq_bins,
            frames: self.frames,
        }
    }
}

/// Element-wise `20·log10(max(m, 1e-10))`.
pub fn log_amplitude<T: Scalar>(mag: &Spectrogram<T>) -> Result<Spectrogram<T>> {
    let floor = T::lit(DB_FLOOR_AMPLITUDE);
    let twenty = T::lit(20.0);
    let values = mag
        .values
        .iter()
        .map(|&m| {
            if m.is_nan() || m < T::zero() {
                Err(Error::InvalidArgument(format!("magnitude must be non-negative, got {m}")))
            } else {
                Ok(twenty * m.max(floor).log10())
            }
        })
        .collect::<Result<_>>()?;
    Ok(Spectrogram { values, ..*mag })
}

/// Regression delta along the frame axis of every frequency row:
/// `d_t = Σ_{n=1..N} n·(c_{t+n} − c_{t−n}) / (2·Σ n²)`, `N = (width−1)/2`,
/// with out-of-range frames replaced by the nearest edge frame.
pub fn delta<T: Scalar>(grid: &Spectrogram<T>, width: usize) -> Result<Spectrogram<T>> {
    delta_with_mode(grid, DeltaMode::Regression { width })
}

pub fn delta_with_mode<T: Scalar>(grid: &Spectrogram<T>, mode: DeltaMode) -> Result<Spectrogram<T>> {
    if grid.frames == 0 {
        return Err(Error::InvalidArgument("delta needs at least one frame".into()));
    }
    let frames = grid.frames as isize;
    let mut out = Spectrogram::zeros(grid.freq_bins, grid.frames);
    match mode {
        DeltaMode::Regression { width } => {
            if width < 3 || width % 2 == 0 {
                return Err(Error::InvalidArgument(format!("delta width must be odd and ≥ 3, got {width}")));
            }
            let half = (width - 1) / 2;
            let denom = T::lit(2.0 * (1..=half).map(|n| (n * n) as f64).sum::<f64>());
            for bin in 0..grid.freq_bins {
                let row = grid.row(bin);
                let at = |t: isize| row[t.clamp(0, frames - 1) as usize];
                for (t, d) in out.row_mut(bin).iter_mut().enumerate() {
                    let t = t as isize;
                    let num = (1..=half as isize).fold(T::zero(), |acc, n| {
                        acc + T::lit(n as f64) * (at(t + n) - at(t - n))
                    });
                    *d = num / denom;
                }
            }
        }
        DeltaMode::Difference => {
            for bin in 0..grid.freq_bins {
                let row = grid.row(bin);
                let dst = out.row_mut(bin);
                for t in 1..row.len() {
                    dst[t] = row[t] - row[t - 1];
                }
            }
        }
    }
    Ok(out)
}

/// Reusable feature extractor holding the STFT plan.
#[derive(Debug, Clone)]
pub struct Featurizer<T> {
    config: FeatureConfig,
    stft: Stft<T>,
}

impl<T: Scalar> Featurizer<T> {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        Ok(Self {
            stft: Stft::new(config.n_fft, config.hop)?,
            config,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn featurize(&self, segment: &[T]) -> Result<FeatureTensor<T>> {
        if segment.len() != self.config.segment_len {
            return Err(Error::Shape(format!(
                "segment has {} samples, expected {}",
                segment.len(),
                self.config.segment_len
            )));
        }
        let log = log_amplitude(&self.stft.magnitude(segment)?)?;
        let d = delta_with_mode(&log, self.config.delta)?;
        FeatureTensor::stack(&log, &d)
    }
}

/// Default features of a 2000-sample segment: shape (129, 32, 2).
pub fn featurize<T: Scalar>(segment: &[T]) -> Result<FeatureTensor<T>> {
    Featurizer::new(FeatureConfig::default())?.featurize(segment)
}
