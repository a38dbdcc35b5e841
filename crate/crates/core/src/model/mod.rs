//! The spectrogram classifier: a shared conv stem feeding a residual feature
//! branch and a frequency-attention branch, concatenated, flattened and
//! mapped to three class logits.

mod attention;
mod block;
mod io;
mod standardize;

pub use attention::{AttentionCache, AttentionGrads, SpectralAttention};
pub use block::{BlockCache, BlockGrads, FeatureBlock};
pub use io::{load_model, load_model_expecting, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use standardize::Standardization;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::FeatureSet;
use crate::error::{Error, Result};
use crate::label::N_CLASSES;
use crate::nncore::{
    concat_channels, flatten, relu, relu_backward, softmax_rows, split_channels, unflatten, BatchNorm,
    BatchNormCache, BatchNormGrads, Conv2d, Conv2dGrads, Dense, DenseGrads, Mode, Tensor,
};
use crate::scalar::Scalar;

/// Trainable parameter count of [`ModelConfig::default`].
pub const DEFAULT_PARAM_COUNT: usize = 617_748;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub stem_channels: usize,
    pub feature_channels: usize,
    pub attention_hidden: usize,
    pub kernel: (usize, usize),
    pub input_shape: [usize; 3],
    pub n_classes: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            stem_channels: 16,
            feature_channels: 32,
            attention_hidden: 32,
            kernel: (3, 3),
            input_shape: [129, 32, 2],
            n_classes: N_CLASSES,
            seed: 0,
            standardize: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [self.stem_channels, self.feature_channels, self.attention_hidden];
        if counts.contains(&0) || self.input_shape.contains(&0) {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        if self.kernel.0 % 2 == 0 || self.kernel.1 % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel {:?} must have odd sides", self.kernel)));
        }
        if self.n_classes != N_CLASSES {
            return Err(Error::InvalidArgument(format!("n_classes must be {N_CLASSES}")));
        }
        Ok(())
    }

    /// Length of the flattened concat output.
    pub fn flat_len(&self) -> usize {
        let [f, t, _] = self.input_shape;
        f * t * (self.stem_channels + self.feature_channels)
    }

    /// Everything that fixes parameter shapes; the seed is excluded.
    pub fn same_architecture(&self, other: &Self) -> bool {
        let strip = |c: &Self| Self { seed: 0, ..c.clone() };
        strip(self) == strip(other)
    }
}

/// Parameters, running statistics and input scaling of one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub config: ModelConfig,
    pub stem_conv: Conv2d<T>,
    pub stem_bn: BatchNorm<T>,
    pub feature: FeatureBlock<T>,
    pub attention: SpectralAttention<T>,
    pub head: Dense<T>,
    pub standardization: Standardization<T>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    pub logits: Tensor<T>,
    pub probs: Tensor<T>,
}

/// Activations retained by a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    input: Tensor<T>,
    stem_bn: BatchNormCache<T>,
    stem_out: Tensor<T>,
    attention: AttentionCache<T>,
    feature: BlockCache<T>,
    flat: Tensor<T>,
}

impl<T> ForwardCache<T> {
    pub fn attention_weights(&self) -> &Tensor<T> {
        &self.attention.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub stem_conv: Conv2dGrads<T>,
    pub stem_bn: BatchNormGrads<T>,
    pub feature: BlockGrads<T>,
    pub attention: AttentionGrads<T>,
    pub head: DenseGrads<T>,
}

impl<T> ModelGrads<T> {
    /// Gradient slices in [`ModelState::params_mut`] order.
    pub fn slices(&self) -> Vec<&[T]> {
        let f = &self.feature;
        vec![
            &self.stem_conv.kernel,
            &self.stem_conv.bias,
            &self.stem_bn.gamma,
            &self.stem_bn.beta,
            &f.conv1.kernel,
            &f.conv1.bias,
            &f.bn1.gamma,
            &f.bn1.beta,
            &f.conv2.kernel,
            &f.conv2.bias,
            &f.bn2.gamma,
            &f.bn2.beta,
            &f.proj.kernel,
            &f.proj.bias,
            &self.attention.squeeze.weights,
            &self.attention.squeeze.bias,
            &self.attention.excite.weights,
            &self.attention.excite.bias,
            &self.head.weights,
            &self.head.bias,
        ]
    }
}

pub const PARAM_NAMES: [&str; 20] = [
    "stem.conv.kernel",
    "stem.conv.bias",
    "stem.bn.gamma",
    "stem.bn.beta",
    "feature.conv1.kernel",
    "feature.conv1.bias",
    "feature.bn1.gamma",
    "feature.bn1.beta",
    "feature.conv2.kernel",
    "feature.conv2.bias",
    "feature.bn2.gamma",
    "feature.bn2.beta",
    "feature.proj.kernel",
    "feature.proj.bias",
    "attention.squeeze.weights",
    "attention.squeeze.bias",
    "attention.excite.weights",
    "attention.excite.bias",
    "head.weights",
    "head.bias",
];

impl<T: Scalar> ModelState<T> {
    /// All weights zero, BN at identity, no input scaling.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let (kh, kw) = config.kernel;
        let [f, _, c_in] = config.input_shape;
        Ok(Self {
            config: config.clone(),
            stem_conv: Conv2d::zeros(kh, kw, c_in, config.stem_channels)?,
            stem_bn: BatchNorm::new(config.stem_channels),
            feature: FeatureBlock::zeros(kh, kw, config.stem_channels, config.feature_channels)?,
            attention: SpectralAttention::zeros(f, config.attention_hidden),
            head: Dense::zeros(config.flat_len(), config.n_classes),
            standardization: Standardization::identity(c_in),
        })
    }

    /// He-normal weights (variance 2/fan_in) drawn in parameter order from
    /// `config.seed`; biases zero.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        let mut state = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let fill = |data: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            data.iter_mut().for_each(|v| *v = T::lit(normal.sample(rng)));
        };
        for conv in [
            &mut state.stem_conv,
            &mut state.feature.conv1,
            &mut state.feature.conv2,
            &mut state.feature.proj,
        ] {
            let fan_in = conv.fan_in();
            fill(conv.kernel.data_mut(), fan_in, &mut rng);
        }
        for dense in [&mut state.attention.squeeze, &mut state.attention.excite, &mut state.head] {
            let fan_in = dense.n_in();
            fill(dense.weights.data_mut(), fan_in, &mut rng);
        }
        Ok(state)
    }

    /// Fit input scaling to the training features when the config asks for it.
    pub fn fit_standardization(&mut self, train: &FeatureSet<T>) -> Result<()> {
        if train.dims != self.config.input_shape {
            return Err(Error::Shape(format!(
                "features {:?} do not match model input {:?}",
                train.dims, self.config.input_shape
            )));
        }
        if self.config.standardize {
            self.standardization = Standardization::fit(train)?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&[T]> {
        let f = &self.feature;
        vec![
            self.stem_conv.kernel.data(),
            &self.stem_conv.bias,
            &self.stem_bn.gamma,
            &self.stem_bn.beta,
            f.conv1.kernel.data(),
            &f.conv1.bias,
            &f.bn1.gamma,
            &f.bn1.beta,
            f.conv2.kernel.data(),
            &f.conv2.bias,
            &f.bn2.gamma,
            &f.bn2.beta,
            f.proj.kernel.data(),
            &f.proj.bias,
            self.attention.squeeze.weights.data(),
            &self.attention.squeeze.bias,
            self.attention.excite.weights.data(),
            &self.attention.excite.bias,
            self.head.weights.data(),
            &self.head.bias,
        ]
    }

    /// Trainable parameters in a fixed order, named by [`PARAM_NAMES`].
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let f = &mut self.feature;
        vec![
            self.stem_conv.kernel.data_mut(),
            &mut self.stem_conv.bias,
            &mut self.stem_bn.gamma,
            &mut self.stem_bn.beta,
            f.conv1.kernel.data_mut(),
            &mut f.conv1.bias,
            &mut f.bn1.gamma,
            &mut f.bn1.beta,
            f.conv2.kernel.data_mut(),
            &mut f.conv2.bias,
            &mut f.bn2.gamma,
            &mut f.bn2.beta,
            f.proj.kernel.data_mut(),
            &mut f.proj.bias,
            self.attention.squeeze.weights.data_mut(),
            &mut self.attention.squeeze.bias,
            self.attention.excite.weights.data_mut(),
            &mut self.attention.excite.bias,
            self.head.weights.data_mut(),
            &mut self.head.bias,
        ]
    }

    /// Running statistics, stem first, then the feature block's two layers.
    pub fn batchnorms(&self) -> [&BatchNorm<T>; 3] {
        [&self.stem_bn, &self.feature.bn1, &self.feature.bn2]
    }

    pub fn batchnorms_mut(&mut self) -> [&mut BatchNorm<T>; 3] {
        [&mut self.stem_bn, &mut self.feature.bn1, &mut self.feature.bn2]
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
            && self
                .batchnorms()
                .iter()
                .all(|bn| bn.running_mean.iter().chain(&bn.running_var).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let [_, f, t, c] = x.dims4()?;
        if [f, t, c] != self.config.input_shape {
            return Err(Error::Shape(format!(
                "model expects (b, {}, {}, {}) input, got {:?}",
                self.config.input_shape[0],
                self.config.input_shape[1],
                self.config.input_shape[2],
                x.shape()
            )));
        }
        Ok(())
    }

    fn standardized(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut x = x.clone();
        if self.config.standardize {
            self.standardization.apply(&mut x)?;
        }
        Ok(x)
    }

    /// `conv → BN → ReLU` on an already standardized input.
    pub fn stem_forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
        let (n, cache) = self.stem_bn.forward(&self.stem_conv.forward(x)?, mode)?;
        Ok((relu(&n), cache))
    }

    fn run(&self, x: &Tensor<T>, mode: Mode) -> Result<(ForwardOutput<T>, Option<ForwardCache<T>>)> {
        let input = self.standardized(x)?;
        let (stem_out, stem_bn) = self.stem_forward(&input, mode)?;
        let (att_out, attention) = self.attention.forward(&stem_out)?;
        let (feat_out, feature) = self.feature.forward(&stem_out, mode)?;
        let flat = flatten(concat_channels(&att_out, &feat_out)?)?;
        let logits = self.head.forward(&flat)?;
        let probs = softmax_rows(&logits)?;
        let cache = match (stem_bn, feature) {
            (Some(stem_bn), Some(feature)) => Some(ForwardCache {
                input,
                stem_bn,
                stem_out,
                attention,
                feature,
                flat,
            }),
            _ => None,
        };
        Ok((ForwardOutput { logits, probs }, cache))
    }

    /// Forward pass without retained activations.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<ForwardOutput<T>> {
        Ok(self.run(x, mode)?.0)
    }

    /// Train-mode forward pass keeping everything [`Self::backward`] needs.
    /// Running statistics are left untouched; see [`Self::update_running`].
    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(ForwardOutput<T>, ForwardCache<T>)> {
        let (out, cache) = self.run(x, Mode::Train)?;
        Ok((out, cache.expect("train mode caches")))
    }

    pub fn update_running(&mut self, cache: &ForwardCache<T>) {
        self.stem_bn.update_running(&cache.stem_bn);
        self.feature.update_running(&cache.feature);
    }

    /// Parameter gradients given the loss gradient w.r.t. the logits.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_logits: &Tensor<T>) -> Result<ModelGrads<T>> {
        let (g_flat, head) = self.head.backward(&cache.flat, grad_logits)?;
        let mut cat_shape = cache.stem_out.shape().to_vec();
        cat_shape[3] = self.config.stem_channels + self.config.feature_channels;
        let g_cat = unflatten(g_flat, &cat_shape)?;
        let (g_att, g_feat) = split_channels(&g_cat, self.config.stem_channels)?;
        let (gs_att, attention) = self.attention.backward(&cache.stem_out, &cache.attention, &g_att)?;
        let (gs_feat, feature) = self.feature.backward(&cache.stem_out, &cache.feature, &g_feat)?;
        let g_stem = relu_backward(&cache.stem_out, &gs_att.add(&gs_feat)?)?;
        let (g_conv, stem_bn) = self.stem_bn.backward(&cache.stem_bn, &g_stem)?;
        let (_, stem_conv) = self.stem_conv.backward(&cache.input, &g_conv, false)?;
        Ok(ModelGrads {
            stem_conv,
            stem_bn,
            feature,
            attention,
            head,
        })
    }
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict<T: Scalar>(probs: &[T]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Stack records `indices` of `set` into a `(b, f, t, c)` batch.
pub fn batch_tensor<T: Scalar>(set: &FeatureSet<T>, indices: &[usize]) -> Result<Tensor<T>> {
    let [f, t, c] = set.dims;
    let mut data = Vec::with_capacity(indices.len() * set.record_len());
    for &i in indices {
        if i >= set.len() {
            return Err(Error::InvalidArgument(format!("record {i} out of range 0..{}", set.len())));
        }
        data.extend_from_slice(set.record(i));
    }
    Tensor::from_vec(&[indices.len(), f, t, c], data)
}

/// Infer-mode class probabilities for every record, in chunks of `batch`.
pub fn predict_probs<T: Scalar>(model: &ModelState<T>, set: &FeatureSet<T>, batch: usize) -> Result<Vec<[T; N_CLASSES]>> {
    let mut out = Vec::with_capacity(set.len());
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(batch.max(1)) {
        let probs = model.forward(&batch_tensor(set, chunk)?, Mode::Infer)?.probs;
        for row in probs.data().chunks_exact(N_CLASSES) {
            out.push([row[0], row[1], row[2]]);
        }
    }
    Ok(out)
}
