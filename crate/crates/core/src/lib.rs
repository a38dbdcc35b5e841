//! EMG recordings in, class probabilities out: windowing and resampling,
//! log and delta spectrogram features, a small convolutional network with a
//! per-frequency attention gate, training, and one-vs-rest metrics.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the two instantiations in common use.

pub mod cli;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod ingest;
pub mod label;
pub mod model;
pub mod nncore;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use label::{ClassLabel, N_CLASSES};
pub use scalar::{FlushToZero, Scalar};

pub type Tensor32 = nncore::Tensor<f32>;
pub type Tensor64 = nncore::Tensor<f64>;
pub type Model32 = model::ModelState<f32>;
pub type Model64 = model::ModelState<f64>;
pub type FeatureSet32 = dsp::FeatureSet<f32>;
pub type FeatureSet64 = dsp::FeatureSet<f64>;
pub type Segment32 = ingest::Segment<f32>;
pub type Segment64 = ingest::Segment<f64>;
