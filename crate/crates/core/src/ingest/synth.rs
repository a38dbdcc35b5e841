//! Desk-scale synthetic stand-in for clinical recordings. Each class occupies
//! its own spectral region so learned features are separable by construction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::fsutil::derive_seed;
use crate::ingest::{Recording, Segment, SegmentSource, SEGMENT_LEN, SEGMENT_RATE_HZ};
use crate::label::ClassLabel;
use crate::scalar::Scalar;

const GAIN_TAG: u64 = 0x6741_494e;
const SIGNAL_TAG: u64 = 0x5349_474e;
const NOISE_FLOOR: f64 = 0.01;
const BURST_CARRIER_HZ: f64 = 200.0;
const BURST_GATE_HZ: f64 = 5.0;

/// Spectral signature of one synthetic class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthBand {
    /// Gaussian noise confined to `[lo, hi]` Hz.
    Noise { lo: f64, hi: f64 },
    /// Sinusoidal carrier switched on and off by a square gate.
    Bursts { carrier_hz: f64, gate_hz: f64 },
}

impl SynthBand {
    pub fn for_class(label: ClassLabel) -> Self {
        match label {
            ClassLabel::Myopathy => SynthBand::Noise { lo: 50.0, hi: 150.0 },
            ClassLabel::Normal => SynthBand::Noise { lo: 300.0, hi: 500.0 },
            ClassLabel::Als => SynthBand::Bursts {
                carrier_hz: BURST_CARRIER_HZ,
                gate_hz: BURST_GATE_HZ,
            },
        }
    }
}

/// Unit-scale signal of the given class, times `gain`, plus a small white
/// noise floor.
pub fn synth_signal(label: ClassLabel, gain: f64, rng: &mut ChaCha8Rng, sample_rate_hz: f64, len: usize) -> Vec<f64> {
    let mut x = match SynthBand::for_class(label) {
        SynthBand::Noise { lo, hi } => band_noise(rng, sample_rate_hz, len, lo, hi),
        SynthBand::Bursts { carrier_hz, gate_hz } => {
            let carrier_phase = rng.gen::<f64>() * 2.0 * PI;
            let gate_phase = rng.gen::<f64>();
            (0..len)
                .map(|n| {
                    let t = n as f64 / sample_rate_hz;
                    let on = (t * gate_hz + gate_phase).fract() < 0.5;
                    if on {
                        // √2 gives the carrier unit RMS while on
                        2f64.sqrt() * (2.0 * PI * carrier_hz * t + carrier_phase).sin()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };
    for v in x.iter_mut() {
        let floor: f64 = rng.sample(StandardNormal);
        *v = gain * (*v + NOISE_FLOOR * floor);
    }
    x
}

fn band_noise(rng: &mut ChaCha8Rng, fs: f64, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..len).map(|_| Complex::new(rng.sample(StandardNormal), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(len - k) as f64 * fs / len as f64;
        if bin < lo || bin > hi {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        x.into_iter().map(|v| v / rms).collect()
    } else {
        x
    }
}

fn subject_gain(seed: u64, label: ClassLabel, subject: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[GAIN_TAG, label.index() as u64, subject as u64]));
    rng.gen_range(0.5..2.0)
}

fn subject_id(label: ClassLabel, subject: usize) -> String {
    format!("{label}-s{subject:02}")
}

fn generate<T: Scalar>(
    seed: u64,
    n_per_class: usize,
    n_subjects_per_class: usize,
    sample_rate_hz: f64,
    len: usize,
) -> Vec<(ClassLabel, String, String, Vec<T>)> {
    let n_subjects = n_subjects_per_class.max(1);
    let mut out = Vec::with_capacity(3 * n_per_class);
    for label in ClassLabel::ALL {
        for i in 0..n_per_class {
            let subject = i % n_subjects;
            let gain = subject_gain(seed, label, subject);
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SIGNAL_TAG, label.index() as u64, i as u64]));
            let x = synth_signal(label, gain, &mut rng, sample_rate_hz, len);
            out.push((
                label,
                subject_id(label, subject),
                format!("synth-{label}-{i:04}"),
                x.into_iter().map(T::lit).collect(),
            ));
        }
    }
    out
}

/// Segments generated directly at the segment rate, `n_per_class` per class,
/// spread round-robin over `n_subjects_per_class` subjects.
pub fn synth_dataset<T: Scalar>(seed: u64, n_per_class: usize, n_subjects_per_class: usize) -> Vec<Segment<T>> {
    generate(seed, n_per_class, n_subjects_per_class, SEGMENT_RATE_HZ, SEGMENT_LEN)
        .into_iter()
        .map(|(label, subject_id, recording_id, samples)| Segment {
            samples,
            label,
            subject_id,
            source: SegmentSource {
                recording_id,
                window_index: 0,
            },
        })
        .collect()
}

/// Full-rate recordings of `len` samples each, for exercising the on-disk
/// ingest path.
pub fn synth_recordings(
    seed: u64,
    n_per_class: usize,
    n_subjects_per_class: usize,
    sample_rate_hz: f64,
    len: usize,
) -> Result<Vec<Recording<f32>>> {
    generate::<f32>(seed, n_per_class, n_subjects_per_class, sample_rate_hz, len)
        .into_iter()
        .map(|(label, subject, id, samples)| Recording::new(samples, sample_rate_hz, label, subject, id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fraction of one-sided spectral energy below `cutoff` Hz, by direct DFT.
    fn energy_below(x: &[f64], fs: f64, cutoff: f64) -> f64 {
        let n = x.len();
        let (mut below, mut total) = (0.0, 0.0);
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let ph = -2.0 * PI * (k * j % n) as f64 / n as f64;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            let e = re * re + im * im;
            total += e;
            if ((k as f64) * fs / n as f64) < cutoff {
                below += e;
            }
        }
        below / total
    }

    #[test]
    fn counts_per_label() {
        let d = synth_dataset::<f64>(7, 10, 2);
        assert_eq!(d.len(), 30);
        for label in ClassLabel::ALL {
            assert_eq!(d.iter().filter(|s| s.label == label).count(), 10);
        }
        assert!(d.iter().all(|s| s.samples.len() == SEGMENT_LEN));
        let subjects: std::collections::BTreeSet<_> = d.iter().map(|s| s.subject_id.clone()).collect();
        assert_eq!(subjects.len(), 6);
    }

    #[test]
    fn myopathy_energy_sits_below_200_hz() {
        let d = synth_dataset::<f64>(7, 2, 1);
        let frac = energy_below(&d[0].samples, SEGMENT_RATE_HZ, 200.0);
        assert!(frac > 0.8, "only {frac} of energy below 200 Hz");
        let normal = d.iter().find(|s| s.label == ClassLabel::Normal).unwrap();
        assert!(energy_below(&normal.samples, SEGMENT_RATE_HZ, 200.0) < 0.05);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = synth_dataset::<f32>(3, 4, 2);
        let b = synth_dataset::<f32>(3, 4, 2);
        assert!(a.iter().zip(&b).all(|(x, y)| {
            x.samples.iter().map(|v| v.to_bits()).eq(y.samples.iter().map(|v| v.to_bits()))
        }));
        assert_ne!(synth_dataset::<f32>(4, 4, 2)[0].samples, a[0].samples);
    }

    #[test]
    fn bursts_are_gated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = synth_signal(ClassLabel::Als, 1.0, &mut rng, 2000.0, 2000);
        // gated halves: a good share of samples sits at the noise floor
        let quiet = x.iter().filter(|v| v.abs() < 0.05).count();
        assert!(quiet > 700, "{quiet} quiet samples");
    }

    #[test]
    fn recordings_at_full_rate() {
        let recs = synth_recordings(7, 2, 1, 24_000.0, 23_437).unwrap();
        assert_eq!(recs.len(), 6);
        assert!(recs.iter().all(|r| r.samples.len() == 23_437 && r.sample_rate_hz == 24_000.0));
    }
}
