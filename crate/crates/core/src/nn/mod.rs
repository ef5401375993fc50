//! Small convolutional network engine: same-padded conv + ReLU layers, MSE
//! loss, Xavier initialization, Adam, checkpoints and gradient checking.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod network;
pub mod tensor;
pub mod train;

pub use adam::{adam_step, AdamState, TrainHyper};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Metadata};
pub use conv::{conv2d_backward, conv2d_forward, ConvLayer, ConvLayerParams, LayerGrad};
pub use gradcheck::{grad_check, GradCheckReport};
pub use init::{xavier_init, xavier_layer};
pub use loss::mse_loss;
pub use network::{backward, forward, ForwardCache, Gradients, Network, NetworkDef};
pub use tensor::Tensor4;
pub use train::{train_network, LogRecord, TrainSummary};
