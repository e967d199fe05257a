//! Convolutional network engine: layers, softmax cross-entropy with L1
//! weight penalty, Adam, training loop and gradient verification.

pub mod adam;
pub mod gradcheck;
pub mod net;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
pub use net::{default_architecture, softmax, ConvNet, ForwardCache, LayerParams, LayerSpec, Mode, ParamSet};
pub use tensor::Tensor;
pub use train::{argmax, train, train_with_callback, EpochStats, Examples, TrainConfig};

#[cfg(test)]
mod tests;
