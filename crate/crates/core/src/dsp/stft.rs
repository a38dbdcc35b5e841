use std::f64::consts::PI;

use num_complex::Complex;

use crate::dsp::Radix2Fft;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frequency × frame grid, row-major by frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub values: Vec<T>,
    pub freq_bins: usize,
    pub frames: usize,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn zeros(freq_bins: usize, frames: usize) -> Self {
        Self {
            values: vec![T::zero(); freq_bins * frames],
            freq_bins,
            frames,
        }
    }

    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> T {
        self.values[bin * self.frames + frame]
    }

    pub fn row(&self, bin: usize) -> &[T] {
        &self.values[bin * self.frames..(bin + 1) * self.frames]
    }

    pub fn row_mut(&mut self, bin: usize) -> &mut [T] {
        &mut self.values[bin * self.frames..(bin + 1) * self.frames]
    }

    /// Column `frame` as a vector over frequency bins.
    pub fn column(&self, frame: usize) -> Vec<T> {
        (0..self.freq_bins).map(|b| self.get(b, frame)).collect()
    }
}

/// Periodic (DFT-even) Hann window, `w[n] = 0.5(1 − cos(2πn/N))`.
pub fn periodic_hann<T: Scalar>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| T::lit(0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())))
        .collect()
}

/// Mirror-pads `x` by `pad` on both sides without repeating the edge sample
/// (`x[-1] = x[1]`), reflecting repeatedly when `pad ≥ len`.
pub fn reflect_pad<T: Copy>(x: &[T], pad: usize) -> Vec<T> {
    let n = x.len() as isize;
    if n == 1 {
        return vec![x[0]; x.len() + 2 * pad];
    }
    let period = 2 * (n - 1);
    (-(pad as isize)..n + pad as isize)
        .map(|i| {
            let mut j = i.rem_euclid(period);
            if j >= n {
                j = period - j;
            }
            x[j as usize]
        })
        .collect()
}

/// Centred short-time Fourier transform magnitude with a periodic Hann window.
#[derive(Debug, Clone)]
pub struct Stft<T> {
    n_fft: usize,
    hop: usize,
    window: Vec<T>,
    fft: Radix2Fft<T>,
}

impl<T: Scalar> Stft<T> {
    pub fn new(n_fft: usize, hop: usize) -> Result<Self> {
        if hop == 0 {
            return Err(Error::InvalidArgument("hop must be positive".into()));
        }
        Ok(Self {
            n_fft,
            hop,
            window: periodic_hann(n_fft),
            fft: Radix2Fft::new(n_fft)?,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    pub fn freq_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// `floor(len / hop) + 1` for the centred layout.
    pub fn frame_count(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    /// Windowed samples of frame `t` from an already padded signal.
    pub fn windowed_frame(&self, padded: &[T], t: usize) -> Vec<T> {
        let start = t * self.hop;
        padded[start..start + self.n_fft]
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| x * w)
            .collect()
    }

    pub fn magnitude(&self, segment: &[T]) -> Result<Spectrogram<T>> {
        if segment.len() < self.n_fft / 2 || segment.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "segment of {} samples is shorter than n_fft/2 = {}",
                segment.len(),
                self.n_fft / 2
            )));
        }
        let padded = reflect_pad(segment, self.n_fft / 2);
        let frames = self.frame_count(segment.len());
        let bins = self.freq_bins();
        let mut out = Spectrogram::zeros(bins, frames);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n_fft];
        for t in 0..frames {
            let start = t * self.hop;
            for ((b, &x), &w) in buf.iter_mut().zip(&padded[start..start + self.n_fft]).zip(&self.window) {
                *b = Complex::new(x * w, T::zero());
            }
            self.fft.process(&mut buf);
            for (k, c) in buf.iter().take(bins).enumerate() {
                out.values[k * frames + t] = c.norm();
            }
        }
        Ok(out)
    }
}

/// STFT magnitude grid (`n_fft/2 + 1` bins × `len/hop + 1` frames).
pub fn stft_magnitude<T: Scalar>(segment: &[T], n_fft: usize, hop: usize) -> Result<Spectrogram<T>> {
    Stft::new(n_fft, hop)?.magnitude(segment)
}

/// Direct O(N²) DFT magnitudes of bins `0..=N/2`; the reference the fast
/// path is checked against.
pub fn naive_dft_frame<T: Scalar>(frame: &[T]) -> Vec<T> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (T::zero(), T::zero());
            for (j, &x) in frame.iter().enumerate() {
                let ang = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                re = re + x * T::lit(ang.cos());
                im = im + x * T::lit(ang.sin());
            }
            re.hypot(im)
        })
        .collect()
}
