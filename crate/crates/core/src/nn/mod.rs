//! Small dense networks trained with backprop on the CPU.

mod network;
mod optim;
mod tensor;
mod train;

pub use network::{forward_backward, init_network, Gradients, InitRule, Network, NetworkSpec, OutputKind};
pub use optim::{LrSchedule, OptimizerKind};
pub use tensor::Tensor2D;
pub use train::{evaluate, train, EpochRecord, Evaluation, TrainConfig, TrainReport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
}
