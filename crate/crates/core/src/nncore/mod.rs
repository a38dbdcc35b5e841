//! Dense-storage tensors and the hand-written layers the classifier needs.
//! Every layer exposes an explicit `backward` returning exact gradients.

mod activation;
mod batchnorm;
mod conv;
mod dense;
pub mod gradcheck;
mod loss;
mod optim;
mod shape_ops;
mod tensor;

pub use activation::{relu, relu_backward, sigmoid};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads, Mode, BN_EPS, BN_MOMENTUM};
pub use conv::{Conv2d, Conv2dGrads};
pub use dense::{Dense, DenseGrads};
pub use loss::{softmax_rows, softmax_xent, XentOutput};
pub use optim::{AdamConfig, AdamState, Optimizer, SgdMomentum};
pub use shape_ops::{concat_channels, flatten, split_channels, unflatten};
pub use tensor::Tensor;
