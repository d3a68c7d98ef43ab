use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Probability clamp for the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

/// Per-class loss weights for binary cross-entropy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassWeights {
    pub positive: f64,
    pub negative: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self {
            positive: 1.0,
            negative: 1.0,
        }
    }
}

fn check_label(label: f64) -> Result<()> {
    if label == 0.0 || label == 1.0 {
        Ok(())
    } else {
        Err(NnError::InvalidLabel(label))
    }
}

/// `-(w_pos * y * ln p + w_neg * (1 - y) * ln(1 - p))` with `p` clamped to `[eps, 1 - eps]`.
pub fn weighted_bce(pred: f64, label: f64, weights: ClassWeights) -> Result<f64> {
    check_label(label)?;
    let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    Ok(-(weights.positive * label * p.ln() + weights.negative * (1.0 - label) * (1.0 - p).ln()))
}

/// Derivative of [`weighted_bce`] with respect to `pred` (zero where the clamp is active).
pub fn weighted_bce_grad(pred: f64, label: f64, weights: ClassWeights) -> Result<f64> {
    check_label(label)?;
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&pred) {
        return Ok(0.0);
    }
    Ok(-(weights.positive * label / pred) + weights.negative * (1.0 - label) / (1.0 - pred))
}

/// Mean weighted BCE over a `[B, 1]` prediction tensor, with its gradient.
pub fn batch_weighted_bce(preds: &Tensor, labels: &[f64], weights: ClassWeights) -> Result<(f64, Tensor)> {
    if preds.len() != labels.len() {
        return Err(NnError::ShapeMismatch {
            layer: "weighted_bce".into(),
            expected: format!("{} predictions", labels.len()),
            found: format!("{}", preds.len()),
        });
    }
    let n = labels.len().max(1) as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (&p, &y) in preds.data().iter().zip(labels) {
        total += weighted_bce(p, y, weights)?;
        grad.push(weighted_bce_grad(p, y, weights)? / n);
    }
    Ok((total / n, Tensor::new(preds.shape().to_vec(), grad)?))
}
