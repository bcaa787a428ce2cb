//! Small dense-network engine: ReLU MLPs with linear, softmax or sigmoid
//! heads, the losses used for Q-regression and steps-to-cost training, an
//! adaptive-moment optimizer, and finite-difference gradient checking.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod mlp;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use checkpoint::{NetCheckpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, CheckLoss, GradCheckReport};
pub use loss::{bce_loss, huber_loss, nll_loss, NllLoss};
pub use mlp::{sigmoid, softmax, ForwardCache, Gradients, Head, Layer, Mlp};
