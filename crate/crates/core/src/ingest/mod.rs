//! Loading labeled recordings, cutting them into fixed-length windows and
//! resampling each window to the model's segment length.

mod manifest;
mod resample;
mod signal_file;
mod split;
mod synth;

pub use manifest::{load_manifest, write_manifest, DatasetManifest, ManifestEntry, SplitTag};
pub use resample::{resample_window, Resampler, KAISER_BETA, TAPS_PER_BRANCH};
pub use signal_file::{load_recording, read_signal, write_signal, SignalFormat, SIGNAL_MAGIC, SIGNAL_VERSION};
pub use split::{split_by_subject, SplitRatios, SubjectSplit};
pub use synth::{synth_dataset, synth_recordings, synth_signal, SynthBand};

use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::scalar::Scalar;

/// Samples per raw analysis window (≈0.977 s at 24 kHz).
pub const WINDOW_LEN: usize = 23_437;
/// Samples per model-input segment.
pub const SEGMENT_LEN: usize = 2_000;
/// Nominal acquisition rate.
pub const NOMINAL_RATE_HZ: f64 = 24_000.0;
/// Effective rate of a segment: a nominal window squeezed into 2000 samples.
pub const SEGMENT_RATE_HZ: f64 = SEGMENT_LEN as f64 * NOMINAL_RATE_HZ / WINDOW_LEN as f64;

/// One raw EMG trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    pub samples: Vec<T>,
    pub sample_rate_hz: f64,
    pub label: ClassLabel,
    pub subject_id: String,
    pub recording_id: String,
}

impl<T: Scalar> Recording<T> {
    pub fn new(
        samples: Vec<T>,
        sample_rate_hz: f64,
        label: ClassLabel,
        subject_id: impl Into<String>,
        recording_id: impl Into<String>,
    ) -> Result<Self> {
        let recording_id = recording_id.into();
        if samples.is_empty() {
            return Err(Error::EmptyRecording(recording_id));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            label,
            subject_id: subject_id.into(),
            recording_id,
        })
    }
}

/// Where a window or segment came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentSource {
    pub recording_id: String,
    pub window_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow<T> {
    pub samples: Vec<T>,
    pub source: SegmentSource,
    pub label: ClassLabel,
    pub subject_id: String,
}

/// One model-input window of exactly [`SEGMENT_LEN`] samples (or the
/// configured output length).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub samples: Vec<T>,
    pub label: ClassLabel,
    pub subject_id: String,
    pub source: SegmentSource,
}

/// Consecutive, non-overlapping windows from sample 0; a trailing remainder
/// shorter than `window_len` is dropped.
pub fn window_recording<T: Scalar>(rec: &Recording<T>, window_len: usize) -> Result<Vec<RawWindow<T>>> {
    if window_len == 0 {
        return Err(Error::InvalidArgument("window_len must be positive".into()));
    }
    Ok(rec
        .samples
        .chunks_exact(window_len)
        .enumerate()
        .map(|(i, chunk)| RawWindow {
            samples: chunk.to_vec(),
            source: SegmentSource {
                recording_id: rec.recording_id.clone(),
                window_index: i,
            },
            label: rec.label,
            subject_id: rec.subject_id.clone(),
        })
        .collect())
}

/// Windows a recording and resamples every window with a shared resampler.
pub fn segment_recording<T: Scalar>(
    rec: &Recording<T>,
    resampler: &Resampler<T>,
) -> Result<Vec<Segment<T>>> {
    window_recording(rec, resampler.in_len())?
        .iter()
        .map(|w| resampler.resample_window(w))
        .collect()
}
