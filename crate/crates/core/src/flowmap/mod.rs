//! Encoder/decoder flow-map MLP with sine activations.
//!
//! Two encoder branches embed the start position and the file cycle; their outputs are
//! concatenated into the latent vector and decoded into the end position. Every fully
//! connected layer except the output layer is followed by `sin(ω0 · x)`.

mod config;
mod gradcheck;
mod model;
mod network;
mod train;

pub use config::{Activation, DropoutConfig, DropoutMode, ModelConfig};
pub use gradcheck::{gradient_check, GradCheck};
pub use model::{FlowMapModel, Normalization};
pub use network::{Dense, DropoutMasks, Loss, Network, Scalar, Tape};
pub(crate) use train::run_steps;
pub use train::{
    eval_abs_error, train, Adam, LrSchedule, Optimizer, OptimizerConfig, Sgd, TrainConfig,
    TrainReport,
};
