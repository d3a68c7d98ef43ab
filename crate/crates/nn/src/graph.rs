use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, NnError, Result};
use crate::gru::{self, GruCache, GruParams};
use crate::layer::{
    inverse_softmax, Activation, Branch, LayerSpec, INVERSE_SOFTMAX_CLAMP, LAYER_NORM_EPS, SCORE_SENTINEL,
};
use crate::linalg::{gemm, MatMut, MatRef};
use crate::tensor::Tensor;

/// Named tensor owned by a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Whether stochastic layers are active.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// A feed-forward stack of layers with its parameters.
///
/// `buffers` hold non-trainable tensors (e.g. feature standardizers) and
/// `attrs` free-form string metadata; both travel with the serialized model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    layers: Vec<LayerSpec>,
    params: Vec<Param>,
    pub buffers: Vec<Param>,
    pub attrs: BTreeMap<String, String>,
    seed: u64,
}

/// Per-layer outputs plus whatever the backward pass needs.
pub struct Tape {
    input: Tensor,
    lengths: Option<Vec<usize>>,
    run: Run,
    recorded: bool,
}

struct Run {
    outputs: Vec<Tensor>,
    caches: Vec<Cache>,
}

enum Cache {
    None,
    Gru(GruCache),
    LayerNorm { xhat: Vec<f64>, inv_std: Vec<f64> },
    Dropout { scale: Vec<f64> },
    Parallel { inputs: Vec<Tensor>, runs: Vec<Run> },
}

impl Tape {
    /// Final activation.
    pub fn output(&self) -> &Tensor {
        self.run.outputs.last().unwrap_or(&self.input)
    }

    /// Output of top-level layer `index`.
    pub fn layer_output(&self, index: usize) -> Option<&Tensor> {
        self.run.outputs.get(index)
    }

    pub fn into_output(mut self) -> Tensor {
        self.run.outputs.pop().unwrap_or(self.input)
    }
}

/// Gradients aligned with [`ModelGraph::params`].
#[derive(Clone, Debug)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        self.0.iter().map(Tensor::sq_norm).sum::<f64>().sqrt()
    }
}

/// Feature width and whether the tensor is `[B, T, F]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Flow {
    dim: usize,
    sequence: bool,
}

fn infer(layers: &[LayerSpec], mut flow: Option<Flow>, top_level: bool, path: &str) -> Result<Flow> {
    for (i, layer) in layers.iter().enumerate() {
        let name = format!("{path}layer{i}.{}", layer.name());
        let need_flat = |f: Option<Flow>, dim: usize| -> Result<()> {
            match f {
                Some(Flow { sequence: true, .. }) => Err(shape_err(&name, "[batch, features]", "sequence input")),
                Some(Flow { dim: d, .. }) if d != dim => Err(shape_err(&name, dim.to_string(), d.to_string())),
                _ => Ok(()),
            }
        };
        flow = Some(match layer {
            LayerSpec::Mask => {
                if !(top_level && i == 0) || !matches!(layers.get(1), Some(LayerSpec::Gru { .. })) {
                    return Err(NnError::InvalidConfig(format!(
                        "{name}: mask must be the first layer, followed by a GRU"
                    )));
                }
                continue;
            }
            LayerSpec::Gru { input, hidden } => {
                if *input == 0 || *hidden == 0 {
                    return Err(NnError::InvalidConfig(format!("{name}: zero-sized GRU")));
                }
                match flow {
                    None => {}
                    Some(Flow { sequence: true, dim }) if dim == *input => {}
                    Some(f) => {
                        return Err(shape_err(&name, format!("sequence of width {input}"), format!("{f:?}")));
                    }
                }
                Flow {
                    dim: *hidden,
                    sequence: false,
                }
            }
            LayerSpec::Dense { input, output, .. } => {
                if *input == 0 || *output == 0 {
                    return Err(NnError::InvalidConfig(format!("{name}: zero-sized dense layer")));
                }
                need_flat(flow, *input)?;
                Flow {
                    dim: *output,
                    sequence: false,
                }
            }
            LayerSpec::LayerNorm { dim } | LayerSpec::InverseSoftmax { dim } => {
                need_flat(flow, *dim)?;
                Flow {
                    dim: *dim,
                    sequence: false,
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(NnError::InvalidConfig(format!(
                        "{name}: dropout rate {rate} outside [0, 1)"
                    )));
                }
                match flow {
                    Some(f) if !f.sequence => f,
                    _ => {
                        return Err(NnError::InvalidConfig(format!(
                            "{name}: dropout needs a known flat input"
                        )))
                    }
                }
            }
            LayerSpec::Parallel { branches } => {
                if branches.is_empty() {
                    return Err(NnError::InvalidConfig(format!("{name}: no branches")));
                }
                let width: usize = branches.iter().map(|b| b.width).sum();
                need_flat(flow, width)?;
                let mut out = 0;
                for (bi, branch) in branches.iter().enumerate() {
                    let f = infer(
                        &branch.layers,
                        Some(Flow {
                            dim: branch.width,
                            sequence: false,
                        }),
                        false,
                        &format!("{name}.branch{bi}."),
                    )?;
                    out += f.dim;
                }
                Flow {
                    dim: out,
                    sequence: false,
                }
            }
        });
    }
    flow.ok_or_else(|| NnError::InvalidConfig("empty graph".into()))
}

fn input_flow(layers: &[LayerSpec]) -> Option<Flow> {
    let first = layers.iter().find(|l| !matches!(l, LayerSpec::Mask))?;
    Some(match first {
        LayerSpec::Gru { input, .. } => Flow {
            dim: *input,
            sequence: true,
        },
        LayerSpec::Dense { input, .. } => Flow {
            dim: *input,
            sequence: false,
        },
        LayerSpec::LayerNorm { dim } | LayerSpec::InverseSoftmax { dim } => Flow {
            dim: *dim,
            sequence: false,
        },
        LayerSpec::Parallel { branches } => Flow {
            dim: branches.iter().map(|b| b.width).sum(),
            sequence: false,
        },
        LayerSpec::Dropout { .. } | LayerSpec::Mask => return None,
    })
}

fn collect_params(layers: &[LayerSpec], prefix: &str, out: &mut Vec<(String, Vec<usize>, LayerSpec)>) {
    for (i, layer) in layers.iter().enumerate() {
        let name = format!("{prefix}layer{i}.{}", layer.name());
        if let LayerSpec::Parallel { branches } = layer {
            for (bi, b) in branches.iter().enumerate() {
                collect_params(&b.layers, &format!("{name}.branch{bi}."), out);
            }
        } else {
            for (pname, shape) in layer.own_param_shapes() {
                out.push((format!("{name}.{pname}"), shape, layer.clone()));
            }
        }
    }
}

fn uniform(rng: &mut impl Rng, n: usize, limit: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

fn init_param(rng: &mut impl Rng, short: &str, shape: &[usize], layer: &LayerSpec) -> Tensor {
    let n: usize = shape.iter().product();
    let data = match (layer, short) {
        (LayerSpec::Gru { input, hidden }, "w_input") => uniform(rng, n, (6.0 / (input + 3 * hidden) as f64).sqrt()),
        (LayerSpec::Gru { hidden, .. }, "w_recurrent") => uniform(rng, n, (6.0 / (4 * hidden) as f64).sqrt()),
        (LayerSpec::Dense { input, output, .. }, "weight") => uniform(rng, n, (6.0 / (input + output) as f64).sqrt()),
        (LayerSpec::LayerNorm { .. }, "gamma") => vec![1.0; n],
        _ => vec![0.0; n],
    };
    Tensor::new(shape.to_vec(), data).expect("init shape")
}

impl ModelGraph {
    /// Validates the layer chain and initializes parameters from `seed`.
    pub fn new(layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        infer(&layers, None, true, "")?;
        let mut shapes = Vec::new();
        collect_params(&layers, "", &mut shapes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = shapes
            .into_iter()
            .map(|(name, shape, layer)| {
                let short = name.rsplit('.').next().unwrap_or("").to_string();
                let value = init_param(&mut rng, &short, &shape, &layer);
                Param { name, value }
            })
            .collect();
        Ok(Self {
            layers,
            params,
            buffers: Vec::new(),
            attrs: BTreeMap::new(),
            seed,
        })
    }

    /// Rebuilds a graph from stored parts, checking parameter shapes.
    pub fn from_parts(layers: Vec<LayerSpec>, params: Vec<Param>, seed: u64) -> Result<Self> {
        let mut g = Self::new(layers, seed)?;
        if params.len() != g.params.len() {
            return Err(shape_err(
                "params",
                g.params.len().to_string(),
                params.len().to_string(),
            ));
        }
        for (slot, p) in g.params.iter_mut().zip(params) {
            if slot.value.shape() != p.value.shape() {
                return Err(shape_err(
                    &slot.name,
                    format!("{:?}", slot.value.shape()),
                    format!("{:?}", p.value.shape()),
                ));
            }
            slot.value = p.value;
            slot.name = p.name;
        }
        Ok(g)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    pub fn buffer(&self, name: &str) -> Option<&Tensor> {
        self.buffers.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn has_mask(&self) -> bool {
        matches!(self.layers.first(), Some(LayerSpec::Mask))
    }

    pub fn is_sequence_input(&self) -> bool {
        input_flow(&self.layers).is_some_and(|f| f.sequence)
    }

    pub fn input_dim(&self) -> usize {
        input_flow(&self.layers).map_or(0, |f| f.dim)
    }

    pub fn output_dim(&self) -> usize {
        infer(&self.layers, None, true, "").map_or(0, |f| f.dim)
    }

    /// Number of parameter tensors owned by top-level layers `[0, upto)`.
    fn param_offset(&self, upto: usize) -> usize {
        let mut shapes = Vec::new();
        collect_params(&self.layers[..upto], "", &mut shapes);
        shapes.len()
    }

    fn check_input(&self, input: &Tensor, lengths: Option<&[usize]>) -> Result<Vec<usize>> {
        if !input.is_finite() {
            return Err(NnError::NonFinite("graph input".into()));
        }
        let first = self.layers.first().map_or("graph", LayerSpec::name);
        let dim = self.input_dim();
        let shape = input.shape();
        if self.is_sequence_input() {
            if shape.len() != 3 || shape[2] != dim {
                return Err(shape_err(
                    format!("layer0.{first}"),
                    format!("[batch, steps, {dim}]"),
                    format!("{shape:?}"),
                ));
            }
            let (batch, steps) = (shape[0], shape[1]);
            match (self.has_mask(), lengths) {
                (true, Some(l)) => {
                    if l.len() != batch {
                        return Err(NnError::Lengths(format!("{} lengths for batch of {batch}", l.len())));
                    }
                    if let Some(bad) = l.iter().find(|&&v| v == 0 || v > steps) {
                        return Err(NnError::Lengths(format!("length {bad} outside 1..={steps}")));
                    }
                    Ok(l.to_vec())
                }
                (true, None) => Err(NnError::Lengths(
                    "graph has a mask layer but no lengths were given".into(),
                )),
                (false, Some(_)) => Err(NnError::Lengths("lengths given but graph has no mask layer".into())),
                (false, None) => Ok(vec![steps; batch]),
            }
        } else {
            if shape.len() != 2 || shape[1] != dim {
                return Err(shape_err(
                    format!("layer0.{first}"),
                    format!("[batch, {dim}]"),
                    format!("{shape:?}"),
                ));
            }
            if lengths.is_some() {
                return Err(NnError::Lengths("lengths given but graph has no mask layer".into()));
            }
            Ok(Vec::new())
        }
    }

    /// Runs the network and returns the final activation.
    pub fn forward(&self, input: &Tensor, lengths: Option<&[usize]>, mode: Mode<'_>) -> Result<Tensor> {
        self.run(input, lengths, mode, false).map(Tape::into_output)
    }

    /// Runs the network keeping every layer output and the caches needed by
    /// [`ModelGraph::backward`].
    pub fn forward_record(&self, input: &Tensor, lengths: Option<&[usize]>, mode: Mode<'_>) -> Result<Tape> {
        self.run(input, lengths, mode, true)
    }

    /// Like `forward`, but keeps every top-level layer output.
    pub fn forward_layers(&self, input: &Tensor, lengths: Option<&[usize]>) -> Result<Tape> {
        self.run(input, lengths, Mode::Eval, false)
    }

    fn run(&self, input: &Tensor, lengths: Option<&[usize]>, mut mode: Mode<'_>, record: bool) -> Result<Tape> {
        let lens = self.check_input(input, lengths)?;
        let mut cursor = 0;
        let run = run_layers(
            &self.layers,
            &self.params,
            &mut cursor,
            input,
            &lens,
            &mut mode,
            record,
            "",
        )?;
        Ok(Tape {
            input: input.clone(),
            lengths: lengths.map(<[usize]>::to_vec),
            run,
            recorded: record,
        })
    }

    /// Runs top-level layers `[start, end)` on an intermediate activation, in eval mode.
    pub fn forward_range(&self, start: usize, input: &Tensor) -> Result<Tensor> {
        if start > self.layers.len() || self.layers[start..].iter().any(LayerSpec::is_sequence) {
            return Err(NnError::InvalidConfig(format!("cannot resume at layer {start}")));
        }
        let mut cursor = self.param_offset(start);
        let mut mode = Mode::Eval;
        let run = run_layers(
            &self.layers[start..],
            &self.params,
            &mut cursor,
            input,
            &[],
            &mut mode,
            false,
            "",
        )?;
        Ok(run.outputs.into_iter().last().unwrap_or_else(|| input.clone()))
    }

    /// Gradients of a scalar objective given `d objective / d output`.
    pub fn backward(&self, tape: &Tape, grad_output: &Tensor) -> Result<Gradients> {
        if !tape.recorded {
            return Err(NnError::MissingForward);
        }
        if grad_output.shape() != tape.output().shape() {
            return Err(shape_err(
                "backward",
                format!("{:?}", tape.output().shape()),
                format!("{:?}", grad_output.shape()),
            ));
        }
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        let lens = match &tape.lengths {
            Some(l) => l.clone(),
            None if self.is_sequence_input() => {
                let s = tape.input.shape();
                vec![s[1]; s[0]]
            }
            None => Vec::new(),
        };
        let mut cursor = self.params.len();
        backward_layers(
            &self.layers,
            &self.params,
            &mut grads,
            &mut cursor,
            &tape.input,
            &lens,
            &tape.run,
            grad_output.clone(),
        )?;
        for (g, p) in grads.iter().zip(&self.params) {
            if !g.is_finite() {
                return Err(NnError::NonFiniteGradient(p.name.clone()));
            }
        }
        Ok(Gradients(grads))
    }
}

#[allow(clippy::too_many_arguments)]
fn run_layers(
    layers: &[LayerSpec],
    params: &[Param],
    cursor: &mut usize,
    input: &Tensor,
    lengths: &[usize],
    mode: &mut Mode<'_>,
    record: bool,
    path: &str,
) -> Result<Run> {
    let mut outputs: Vec<Tensor> = Vec::with_capacity(layers.len());
    let mut caches = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let x = outputs.last().unwrap_or(input);
        let (y, cache) = match *layer {
            LayerSpec::Mask => (x.clone(), Cache::None),
            LayerSpec::Gru { input: din, hidden } => {
                let p = gru_params(params, *cursor, din, hidden);
                *cursor += 4;
                let s = x.shape();
                let (out, cache) = gru::forward(&p, x.data(), s[0], s[1], lengths, record);
                let y = Tensor::new(vec![s[0], hidden], out)?;
                (y, cache.map_or(Cache::None, Cache::Gru))
            }
            LayerSpec::Dense {
                input: din,
                output,
                activation,
            } => {
                let (w, b) = (&params[*cursor].value, &params[*cursor + 1].value);
                *cursor += 2;
                (
                    dense_forward(x, w.data(), b.data(), din, output, activation)?,
                    Cache::None,
                )
            }
            LayerSpec::LayerNorm { dim } => {
                let (g, b) = (&params[*cursor].value, &params[*cursor + 1].value);
                *cursor += 2;
                let (y, xhat, inv_std) = layer_norm_forward(x, g.data(), b.data(), dim);
                let cache = if record {
                    Cache::LayerNorm { xhat, inv_std }
                } else {
                    Cache::None
                };
                (y, cache)
            }
            LayerSpec::Dropout { rate } => match mode {
                Mode::Train(rng) if rate > 0.0 => {
                    let keep = 1.0 / (1.0 - rate);
                    let scale: Vec<f64> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                        .collect();
                    let data = x.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
                    let y = Tensor::new(x.shape().to_vec(), data)?;
                    (y, if record { Cache::Dropout { scale } } else { Cache::None })
                }
                _ => (x.clone(), Cache::None),
            },
            LayerSpec::InverseSoftmax { .. } => {
                let data = x
                    .data()
                    .iter()
                    .map(|&v| if v == SCORE_SENTINEL { v } else { inverse_softmax(v) })
                    .collect();
                (Tensor::new(x.shape().to_vec(), data)?, Cache::None)
            }
            LayerSpec::Parallel { ref branches } => {
                let inputs = split_columns(x, branches)?;
                let mut runs = Vec::with_capacity(branches.len());
                for (bi, (branch, bx)) in branches.iter().zip(&inputs).enumerate() {
                    let sub = run_layers(
                        &branch.layers,
                        params,
                        cursor,
                        bx,
                        lengths,
                        mode,
                        record,
                        &format!("{path}layer{i}.branch{bi}."),
                    )?;
                    runs.push(sub);
                }
                let parts: Vec<&Tensor> = runs
                    .iter()
                    .zip(&inputs)
                    .map(|(r, bx)| r.outputs.last().unwrap_or(bx))
                    .collect();
                let y = concat_columns(&parts)?;
                let cache = if record {
                    Cache::Parallel { inputs, runs }
                } else {
                    Cache::None
                };
                (y, cache)
            }
        };
        if !y.is_finite() {
            return Err(NnError::NonFinite(format!("{path}layer{i}.{} output", layer.name())));
        }
        outputs.push(y);
        caches.push(cache);
    }
    Ok(Run { outputs, caches })
}

#[allow(clippy::too_many_arguments)]
fn backward_layers(
    layers: &[LayerSpec],
    params: &[Param],
    grads: &mut [Tensor],
    cursor: &mut usize,
    input: &Tensor,
    lengths: &[usize],
    run: &Run,
    mut dy: Tensor,
) -> Result<Tensor> {
    for (i, layer) in layers.iter().enumerate().rev() {
        let x = if i == 0 { input } else { &run.outputs[i - 1] };
        let y = &run.outputs[i];
        dy = match *layer {
            LayerSpec::Mask => dy,
            LayerSpec::Gru { input: din, hidden } => {
                *cursor -= 4;
                let Cache::Gru(cache) = &run.caches[i] else {
                    return Err(NnError::MissingForward);
                };
                let p = gru_params(params, *cursor, din, hidden);
                let s = x.shape();
                let g = gru::backward(&p, cache, x.data(), s[0], s[1], lengths, dy.data());
                add_into(&mut grads[*cursor], &g.w_input);
                add_into(&mut grads[*cursor + 1], &g.w_recurrent);
                add_into(&mut grads[*cursor + 2], &g.b_input);
                add_into(&mut grads[*cursor + 3], &g.b_recurrent);
                Tensor::new(s.to_vec(), g.dx)?
            }
            LayerSpec::Dense {
                input: din,
                output,
                activation,
            } => {
                *cursor -= 2;
                let w = &params[*cursor].value;
                let (dx, dw, db) = dense_backward(x, y, &dy, w.data(), din, output, activation);
                add_into(&mut grads[*cursor], &dw);
                add_into(&mut grads[*cursor + 1], &db);
                dx
            }
            LayerSpec::LayerNorm { dim } => {
                *cursor -= 2;
                let Cache::LayerNorm { xhat, inv_std } = &run.caches[i] else {
                    return Err(NnError::MissingForward);
                };
                let gamma = &params[*cursor].value;
                let (dx, dg, db) = layer_norm_backward(&dy, xhat, inv_std, gamma.data(), dim);
                add_into(&mut grads[*cursor], &dg);
                add_into(&mut grads[*cursor + 1], &db);
                dx
            }
            LayerSpec::Dropout { .. } => match &run.caches[i] {
                Cache::Dropout { scale } => {
                    let data = dy.data().iter().zip(scale).map(|(g, s)| g * s).collect();
                    Tensor::new(dy.shape().to_vec(), data)?
                }
                _ => dy,
            },
            LayerSpec::InverseSoftmax { .. } => {
                let lo = INVERSE_SOFTMAX_CLAMP;
                let data = x
                    .data()
                    .iter()
                    .zip(dy.data())
                    .map(|(&s, &g)| {
                        if s == SCORE_SENTINEL || s <= lo || s >= 1.0 - lo {
                            0.0
                        } else {
                            g / (s * (1.0 - s))
                        }
                    })
                    .collect();
                Tensor::new(dy.shape().to_vec(), data)?
            }
            LayerSpec::Parallel { ref branches } => {
                let Cache::Parallel { inputs, runs } = &run.caches[i] else {
                    return Err(NnError::MissingForward);
                };
                let widths: Vec<usize> = runs
                    .iter()
                    .zip(inputs)
                    .map(|(r, bx)| r.outputs.last().unwrap_or(bx).row_len())
                    .collect();
                let douts = split_by_widths(&dy, &widths)?;
                let mut dxs = vec![Tensor::zeros(&[0]); branches.len()];
                for bi in (0..branches.len()).rev() {
                    dxs[bi] = backward_layers(
                        &branches[bi].layers,
                        params,
                        grads,
                        cursor,
                        &inputs[bi],
                        lengths,
                        &runs[bi],
                        douts[bi].clone(),
                    )?;
                }
                let refs: Vec<&Tensor> = dxs.iter().collect();
                concat_columns(&refs)?
            }
        };
    }
    Ok(dy)
}

fn gru_params(params: &[Param], at: usize, input: usize, hidden: usize) -> GruParams<'_> {
    GruParams {
        w_input: params[at].value.data(),
        w_recurrent: params[at + 1].value.data(),
        b_input: params[at + 2].value.data(),
        b_recurrent: params[at + 3].value.data(),
        input,
        hidden,
    }
}

fn add_into(dst: &mut Tensor, src: &[f64]) {
    for (d, s) in dst.data_mut().iter_mut().zip(src) {
        *d += s;
    }
}

fn dense_forward(x: &Tensor, w: &[f64], b: &[f64], din: usize, dout: usize, act: Activation) -> Result<Tensor> {
    let rows = x.rows();
    let mut y = vec![0.0; rows * dout];
    gemm(
        MatRef::new(x.data(), rows, din),
        false,
        MatRef::new(w, din, dout),
        false,
        0.0,
        MatMut::new(&mut y, rows, dout),
    );
    for row in y.chunks_exact_mut(dout) {
        for (v, bias) in row.iter_mut().zip(b) {
            *v = act.apply(*v + bias);
        }
    }
    Tensor::new(vec![rows, dout], y)
}

fn dense_backward(
    x: &Tensor,
    y: &Tensor,
    dy: &Tensor,
    w: &[f64],
    din: usize,
    dout: usize,
    act: Activation,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let rows = x.rows();
    let dpre: Vec<f64> = dy
        .data()
        .iter()
        .zip(y.data())
        .map(|(g, &out)| g * act.grad_from_output(out))
        .collect();
    let mut dw = vec![0.0; din * dout];
    gemm(
        MatRef::new(x.data(), rows, din),
        true,
        MatRef::new(&dpre, rows, dout),
        false,
        0.0,
        MatMut::new(&mut dw, din, dout),
    );
    let mut db = vec![0.0; dout];
    for row in dpre.chunks_exact(dout) {
        for (acc, v) in db.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut dx = vec![0.0; rows * din];
    gemm(
        MatRef::new(&dpre, rows, dout),
        false,
        MatRef::new(w, din, dout),
        true,
        0.0,
        MatMut::new(&mut dx, rows, din),
    );
    (Tensor::new(vec![rows, din], dx).expect("dense dx"), dw, db)
}

fn layer_norm_forward(x: &Tensor, gamma: &[f64], beta: &[f64], dim: usize) -> (Tensor, Vec<f64>, Vec<f64>) {
    let rows = x.rows();
    let mut y = vec![0.0; rows * dim];
    let mut xhat = vec![0.0; rows * dim];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / dim as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std[r] = is;
        for j in 0..dim {
            let h = (row[j] - mean) * is;
            xhat[r * dim + j] = h;
            y[r * dim + j] = gamma[j] * h + beta[j];
        }
    }
    (Tensor::new(vec![rows, dim], y).expect("layer norm"), xhat, inv_std)
}

fn layer_norm_backward(
    dy: &Tensor,
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    dim: usize,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let rows = dy.rows();
    let mut dx = vec![0.0; rows * dim];
    let mut dg = vec![0.0; dim];
    let mut db = vec![0.0; dim];
    let n = dim as f64;
    for r in 0..rows {
        let g = dy.row(r);
        let h = &xhat[r * dim..(r + 1) * dim];
        let mut sum_dh = 0.0;
        let mut sum_dh_h = 0.0;
        for j in 0..dim {
            dg[j] += g[j] * h[j];
            db[j] += g[j];
            let dh = g[j] * gamma[j];
            sum_dh += dh;
            sum_dh_h += dh * h[j];
        }
        for j in 0..dim {
            let dh = g[j] * gamma[j];
            dx[r * dim + j] = inv_std[r] / n * (n * dh - sum_dh - h[j] * sum_dh_h);
        }
    }
    (Tensor::new(vec![rows, dim], dx).expect("layer norm dx"), dg, db)
}

fn split_columns(x: &Tensor, branches: &[Branch]) -> Result<Vec<Tensor>> {
    let widths: Vec<usize> = branches.iter().map(|b| b.width).collect();
    split_by_widths(x, &widths)
}

fn split_by_widths(x: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let rows = x.rows();
    let total = x.row_len();
    if widths.iter().sum::<usize>() != total {
        return Err(shape_err(
            "parallel split",
            format!("{} columns", widths.iter().sum::<usize>()),
            total.to_string(),
        ));
    }
    let mut parts: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(rows * w)).collect();
    for r in 0..rows {
        let row = x.row(r);
        let mut at = 0;
        for (part, &w) in parts.iter_mut().zip(widths) {
            part.extend_from_slice(&row[at..at + w]);
            at += w;
        }
    }
    parts
        .into_iter()
        .zip(widths)
        .map(|(d, &w)| Tensor::new(vec![rows, w], d))
        .collect()
}

fn concat_columns(parts: &[&Tensor]) -> Result<Tensor> {
    let rows = parts.first().map_or(0, |p| p.rows());
    let width: usize = parts.iter().map(|p| p.row_len()).sum();
    let mut data = Vec::with_capacity(rows * width);
    for r in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(r));
        }
    }
    Tensor::new(vec![rows, width], data)
}
