//! Dense tensors with reverse-mode differentiation, the layers the model is
//! built from, focal loss, Adam and gradient checking.

pub mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{
    analytic_gradient, compare_gradient, grad_check, GradCheckReport, REL_ERROR_FLOOR,
};
pub use layers::{elu, gru_cell, linear, sigmoid, softmax, Gru, GruCell, Linear, Mlp};
pub use loss::{focal_loss, focal_loss_derivative, focal_loss_scalar};
pub use optim::{adam_step, lr_at, AdamConfig, TrainConfig};
pub use params::{ParamId, ParamStore};
pub use tape::{Graph, Var, PROB_FLOOR};
pub use tensor::Tensor;
