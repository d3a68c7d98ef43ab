use crate::error::{NnError, Result};
use crate::graph::{Gradients, ModelGraph};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in &mut grads.0 {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

/// Adam moment state for one graph.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    steps: u64,
}

impl Adam {
    pub fn new(graph: &ModelGraph, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = graph.params().iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            learning_rate,
            m: zeros.clone(),
            v: zeros,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Clips (when `clip_norm` is set) and applies one Adam update.
    pub fn step(&mut self, graph: &mut ModelGraph, mut grads: Gradients, clip_norm: Option<f64>) -> Result<()> {
        if grads.0.len() != self.m.len() {
            return Err(NnError::InvalidConfig(format!(
                "optimizer tracks {} tensors, got {} gradients",
                self.m.len(),
                grads.0.len()
            )));
        }
        for (g, p) in grads.0.iter().zip(graph.params()) {
            if !g.is_finite() {
                return Err(NnError::NonFiniteGradient(p.name.clone()));
            }
        }
        if let Some(c) = clip_norm {
            clip_global_norm(&mut grads, c);
        }
        self.steps += 1;
        let t = self.steps as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (((p, g), m), v) in graph
            .params_mut()
            .iter_mut()
            .zip(&grads.0)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((w, &gi), mi), vi) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= self.learning_rate * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}
