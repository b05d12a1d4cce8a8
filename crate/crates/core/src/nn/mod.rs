//! Minimal feed-forward networks with hand-written backpropagation.

mod gradcheck;
mod layer;
mod mlp;
mod optim;

pub use gradcheck::{finite_difference, grad_check, max_relative_error};
pub use layer::{Activation, LayerSpec};
pub use mlp::{ForwardCache, ForwardMode, Mlp, ParamShape, ParamSnapshot};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
