//! Target CNN evaluated with externally supplied parameters, the binary
//! cross-entropy loss and the Adam optimizer.

mod adam;
mod cnn;
mod loss;

pub use adam::{adam_step, AdamConfig, TrainState};
pub use cnn::{
    cnn_backward, cnn_forward, count_cnn_params, count_params, CnnArchitecture, LayerSpec,
    N_LAYER_GROUPS,
};
pub use loss::{bce_loss, bce_with_logits, sigmoid, PROB_EPS};
