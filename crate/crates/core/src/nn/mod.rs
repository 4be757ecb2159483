//! Minimal network engine: sequential conv/dense stacks with layer-local
//! backprop, cross-entropy, Adam, gradient checking, and checkpoints.

mod checkpoint;
mod gemm;
pub mod gradcheck;
mod layers;
mod loss;
mod optim;
mod params;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{check_gradient, grad_check, GradCheckReport};
pub use layers::{backward, forward, predict, sigmoid, Cache, LayerKind, LayerSpec, Network};
pub use loss::{cross_entropy, logit_cross_entropy, PROB_EPS};
pub use optim::{optimizer_step, AdamConfig, AdamState};
pub use params::{Param, ParamStore};
pub use tensor::Tensor;
