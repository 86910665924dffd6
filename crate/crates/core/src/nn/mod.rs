//! A small fixed-menu neural network engine: dense, 1D convolution and
//! transposed 1D convolution layers over flat `f64` vectors, trained with
//! per-sample SGD.

pub mod checkpoint;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod network;
pub mod optim;

pub use checkpoint::{load_weights, save_weights, Checkpoint};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use layer::{Activation, BiasMode, ConvGeometry, LayerKind, LayerSpec};
pub use loss::{loss, loss_gradient, LossKind};
pub use network::{
    backward, backward_from_output, forward, predict, ForwardCache, Gradients, LayerParams, Network,
    NetworkSpec, NetworkWeights,
};
pub use optim::{Sgd, SgdConfig};
