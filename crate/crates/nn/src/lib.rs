//! Minimal neural-network kernel with hand-written reverse-mode gradients.
//!
//! Covers exactly what the directedness models need: dense layers, a masked
//! GRU, layer normalization, dropout, a logit input transform, parallel
//! branches, weighted binary cross-entropy and Adam with global-norm clipping.
//! Everything runs in `f64`.

mod error;
mod graph;
mod gru;
mod layer;
mod linalg;
mod loss;
mod optim;
mod serialize;
mod tensor;
mod train;

pub use error::{NnError, Result};
pub use graph::{Gradients, Mode, ModelGraph, Param, Tape};
pub use gru::{gru_cell, GruParams};
pub use layer::{
    inverse_softmax, sigmoid, Activation, Branch, LayerSpec, INVERSE_SOFTMAX_CLAMP, LAYER_NORM_EPS, SCORE_SENTINEL,
};
pub use loss::{batch_weighted_bce, weighted_bce, weighted_bce_grad, ClassWeights, BCE_EPS};
pub use optim::{clip_global_norm, Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use serialize::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use tensor::Tensor;
pub use train::{pad_sequences, shuffled_batches, train_step, TrainConfig};
