use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ingest::{RawWindow, Segment};
use crate::scalar::Scalar;

pub const KAISER_BETA: f64 = 8.6;
/// Filter taps per polyphase branch; the full kernel spans this many periods
/// of the slower of the two rates.
pub const TAPS_PER_BRANCH: usize = 64;
/// Low-pass cutoff as a fraction of the output (or input, when upsampling)
/// Nyquist frequency.
pub const CUTOFF_FRACTION: f64 = 0.95;
const MAX_UPSAMPLING: usize = 4;

/// Band-limited resampler from `in_len` to `out_len` samples.
///
/// Output sample `m` sits at input position `(m + 0.5)·in/out − 0.5` and is a
/// Kaiser-windowed sinc interpolation of its neighbourhood. Weights are
/// computed once per length pair and normalised to unit sum, so DC passes
/// through exactly, including at the edges where the kernel is truncated.
#[derive(Debug, Clone)]
pub struct Resampler<T> {
    in_len: usize,
    out_len: usize,
    starts: Vec<usize>,
    offsets: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Scalar> Resampler<T> {
    pub fn new(in_len: usize, out_len: usize) -> Result<Self> {
        if in_len == 0 || out_len == 0 {
            return Err(Error::InvalidArgument("resampling lengths must be positive".into()));
        }
        if out_len > in_len * MAX_UPSAMPLING {
            return Err(Error::InvalidArgument(format!(
                "upsampling {in_len} -> {out_len} exceeds the supported factor {MAX_UPSAMPLING}"
            )));
        }
        let ratio = out_len as f64 / in_len as f64;
        let scale = ratio.min(1.0);
        // cycles per input sample
        let cutoff = CUTOFF_FRACTION * 0.5 * scale;
        let half_width = 0.5 * TAPS_PER_BRANCH as f64 / scale;
        let i0_beta = bessel_i0(KAISER_BETA);

        let mut starts = Vec::with_capacity(out_len);
        let mut offsets = Vec::with_capacity(out_len + 1);
        let mut weights = Vec::new();
        let mut row = Vec::new();
        offsets.push(0);
        for m in 0..out_len {
            let t = Self::position(m, in_len, out_len);
            let lo = ((t - half_width).ceil().max(0.0)) as usize;
            let hi = ((t + half_width).floor() as isize).min(in_len as isize - 1);
            row.clear();
            if hi >= lo as isize {
                for k in lo..=hi as usize {
                    let tau = k as f64 - t;
                    let r = tau / half_width;
                    let taper = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                    row.push(2.0 * cutoff * sinc(2.0 * cutoff * tau) * taper);
                }
            }
            let sum: f64 = row.iter().sum();
            if row.is_empty() || sum.abs() < 1e-12 {
                // nearest-neighbour fallback; only reachable for degenerate lengths
                let k = t.round().clamp(0.0, (in_len - 1) as f64) as usize;
                starts.push(k);
                weights.push(T::one());
            } else {
                starts.push(lo);
                weights.extend(row.iter().map(|w| T::lit(w / sum)));
            }
            offsets.push(weights.len());
        }
        Ok(Self {
            in_len,
            out_len,
            starts,
            offsets,
            weights,
        })
    }

    /// Position of output sample `m` on the input sample grid.
    pub fn position(m: usize, in_len: usize, out_len: usize) -> f64 {
        (m as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn resample(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_len {
            return Err(Error::Shape(format!(
                "resampler built for {} samples, got {}",
                self.in_len,
                x.len()
            )));
        }
        Ok((0..self.out_len)
            .map(|m| {
                let w = &self.weights[self.offsets[m]..self.offsets[m + 1]];
                let s = self.starts[m];
                w.iter().zip(&x[s..s + w.len()]).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    pub fn resample_window(&self, w: &RawWindow<T>) -> Result<Segment<T>> {
        Ok(Segment {
            samples: self.resample(&w.samples)?,
            label: w.label,
            subject_id: w.subject_id.clone(),
            source: w.source.clone(),
        })
    }
}

/// One-off resampling of a window; prefer a shared [`Resampler`] in loops.
pub fn resample_window<T: Scalar>(w: &RawWindow<T>, out_len: usize) -> Result<Segment<T>> {
    if w.samples.is_empty() {
        return Err(Error::InvalidArgument("cannot resample an empty window".into()));
    }
    Resampler::new(w.samples.len(), out_len)?.resample_window(w)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}
