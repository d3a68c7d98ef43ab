#![allow(dead_code)]

use ddsd_nn::{batch_weighted_bce, ClassWeights, Mode, ModelGraph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

/// Objective used by the gradient checks: weighted BCE if the output is a
/// probability column, otherwise a fixed random projection of the output.
pub struct Objective {
    pub labels: Vec<f64>,
    pub projection: Option<Vec<f64>>,
}

impl Objective {
    pub fn value(&self, graph: &ModelGraph, input: &Tensor, lengths: Option<&[usize]>) -> f64 {
        let out = graph.forward(input, lengths, Mode::Eval).unwrap();
        match &self.projection {
            None => batch_weighted_bce(&out, &self.labels, weights()).unwrap().0,
            Some(c) => out.data().iter().zip(c).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn output_grad(&self, out: &Tensor) -> Tensor {
        match &self.projection {
            None => batch_weighted_bce(out, &self.labels, weights()).unwrap().1,
            Some(c) => Tensor::new(out.shape().to_vec(), c.clone()).unwrap(),
        }
    }
}

pub fn weights() -> ClassWeights {
    ClassWeights {
        positive: 3.0,
        negative: 1.0,
    }
}

/// Largest relative error between analytic and central-difference gradients
/// over `coords` random parameter coordinates.
pub fn max_fd_error(
    graph: &mut ModelGraph,
    input: &Tensor,
    lengths: Option<&[usize]>,
    objective: &Objective,
    coords: usize,
    seed: u64,
) -> (f64, usize) {
    let tape = graph.forward_record(input, lengths, Mode::Eval).unwrap();
    let dout = objective.output_grad(tape.output());
    let grads = graph.backward(&tape, &dout).unwrap();
    let mut r = rng(seed);
    let total: usize = graph.params().iter().map(|p| p.value.len()).sum();
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    // every tensor gets at least one coordinate, the rest are random
    let mut picks: Vec<(usize, usize)> = graph
        .params()
        .iter()
        .enumerate()
        .map(|(i, p)| (i, r.random_range(0..p.value.len())))
        .collect();
    while picks.len() < coords.max(picks.len()) {
        let mut flat = r.random_range(0..total);
        for (i, p) in graph.params().iter().enumerate() {
            if flat < p.value.len() {
                picks.push((i, flat));
                break;
            }
            flat -= p.value.len();
        }
    }
    for (pi, ci) in picks {
        let orig = graph.params()[pi].value.data()[ci];
        graph.params_mut()[pi].value.data_mut()[ci] = orig + step;
        let up = objective.value(graph, input, lengths);
        graph.params_mut()[pi].value.data_mut()[ci] = orig - step;
        let down = objective.value(graph, input, lengths);
        graph.params_mut()[pi].value.data_mut()[ci] = orig;
        let numeric = (up - down) / (2.0 * step);
        let analytic = grads.0[pi].data()[ci];
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
        checked += 1;
    }
    (worst, checked)
}
