/// Elementwise nonlinearity applied after a dense projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub(crate) fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Linear => v,
            Activation::Sigmoid => sigmoid(v),
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    pub(crate) fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Relu => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Linear,
            1 => Activation::Sigmoid,
            2 => Activation::Tanh,
            3 => Activation::Relu,
            _ => return None,
        })
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Score value that marks an absent modality at a fusion input.
pub const SCORE_SENTINEL: f64 = -1.0;

/// Clamp applied before the logit transform.
pub const INVERSE_SOFTMAX_CLAMP: f64 = 1e-6;

/// Logit of a two-class softmax probability: `ln(s / (1 - s))` after clamping.
pub fn inverse_softmax(score: f64) -> f64 {
    let s = score.clamp(INVERSE_SOFTMAX_CLAMP, 1.0 - INVERSE_SOFTMAX_CLAMP);
    (s / (1.0 - s)).ln()
}

/// One sub-network of a [`LayerSpec::Parallel`] block.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// Number of input columns routed to this branch.
    pub width: usize,
    pub layers: Vec<LayerSpec>,
}

/// Layer descriptor. Sequence layers (`Mask`, `Gru`) consume `[B, T, F]`;
/// everything else consumes `[B, F]`.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Marks per-sequence valid lengths; padded steps are skipped by the next GRU.
    Mask,
    /// Single GRU layer returning the hidden state at each sequence's last valid step.
    Gru {
        input: usize,
        hidden: usize,
    },
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    LayerNorm {
        dim: usize,
    },
    Dropout {
        rate: f64,
    },
    /// Elementwise logit with [`SCORE_SENTINEL`] passed through untouched.
    InverseSoftmax {
        dim: usize,
    },
    /// Splits input columns across branches and concatenates their outputs.
    Parallel {
        branches: Vec<Branch>,
    },
}

/// Layer-norm epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Mask => "mask",
            LayerSpec::Gru { .. } => "gru",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::LayerNorm { .. } => "layer_norm",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::InverseSoftmax { .. } => "inverse_softmax",
            LayerSpec::Parallel { .. } => "parallel",
        }
    }

    pub(crate) fn is_sequence(&self) -> bool {
        matches!(self, LayerSpec::Mask | LayerSpec::Gru { .. })
    }

    /// Parameter shapes in storage order, with their short names.
    pub(crate) fn own_param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerSpec::Gru { input, hidden } => vec![
                ("w_input", vec![input, 3 * hidden]),
                ("w_recurrent", vec![hidden, 3 * hidden]),
                ("b_input", vec![3 * hidden]),
                ("b_recurrent", vec![3 * hidden]),
            ],
            LayerSpec::Dense { input, output, .. } => {
                vec![("weight", vec![input, output]), ("bias", vec![output])]
            }
            LayerSpec::LayerNorm { dim } => vec![("gamma", vec![dim]), ("beta", vec![dim])],
            _ => Vec::new(),
        }
    }
}
