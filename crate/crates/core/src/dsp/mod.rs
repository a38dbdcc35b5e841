//! Spectrogram features: centred Hann STFT magnitude, amplitude decibels, and
//! a per-row regression delta, stacked into a two-channel tensor.

mod features;
mod feature_file;
mod fft;
mod stft;

pub use feature_file::{read_features, write_features, FeatureSet, FEATURE_MAGIC, FEATURE_VERSION};
pub use features::{
    delta, delta_with_mode, featurize, log_amplitude, DeltaMode, FeatureConfig, FeatureTensor, Featurizer,
    DB_FLOOR_AMPLITUDE, FEATURE_CHANNELS,
};
pub use fft::Radix2Fft;
pub use stft::{naive_dft_frame, periodic_hann, reflect_pad, stft_magnitude, Spectrogram, Stft};
