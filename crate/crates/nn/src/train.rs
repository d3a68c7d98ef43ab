use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{NnError, Result};
use crate::graph::{Mode, ModelGraph};
use crate::loss::{batch_weighted_bce, ClassWeights};
use crate::optim::Adam;
use crate::tensor::Tensor;

/// Optimization hyper-parameters shared by every trainable model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub class_weights: ClassWeights,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.001,
            batch_size: 150,
            grad_clip_norm: 1.0,
            class_weights: ClassWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad("grad_clip_norm must be positive");
        }
        let w = self.class_weights;
        if !(w.positive > 0.0 && w.negative > 0.0) {
            return bad("class weights must be positive");
        }
        Ok(())
    }
}

/// One forward/backward/update on a batch; returns the mean batch loss.
pub fn train_step(
    graph: &mut ModelGraph,
    adam: &mut Adam,
    input: &Tensor,
    lengths: Option<&[usize]>,
    labels: &[f64],
    config: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let tape = graph.forward_record(input, lengths, Mode::Train(rng))?;
    let (loss, grad) = batch_weighted_bce(tape.output(), labels, config.class_weights)?;
    let grads = graph.backward(&tape, &grad)?;
    adam.step(graph, grads, Some(config.grad_clip_norm))?;
    Ok(loss)
}

/// Shuffled mini-batches of indices `0..n`.
pub fn shuffled_batches(n: usize, batch_size: usize, rng: &mut dyn RngCore) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Zero-pads `T_i x dim` row-major sequences into `[B, max T, dim]`.
pub fn pad_sequences(seqs: &[&[f64]], dim: usize) -> Result<(Tensor, Vec<usize>)> {
    let mut lengths = Vec::with_capacity(seqs.len());
    for s in seqs {
        if dim == 0 || s.len() % dim != 0 || s.is_empty() {
            return Err(NnError::ShapeMismatch {
                layer: "pad_sequences".into(),
                expected: format!("non-empty multiple of {dim}"),
                found: s.len().to_string(),
            });
        }
        lengths.push(s.len() / dim);
    }
    let steps = lengths.iter().copied().max().unwrap_or(0);
    let mut data = vec![0.0; seqs.len() * steps * dim];
    for (b, s) in seqs.iter().enumerate() {
        data[b * steps * dim..b * steps * dim + s.len()].copy_from_slice(s);
    }
    Ok((Tensor::new(vec![seqs.len(), steps, dim], data)?, lengths))
}
