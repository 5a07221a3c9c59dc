//! Per-pixel losses and their gradients with respect to the class probabilities.

use crate::ctensor::ScoreMap;
use crate::error::{Error, Result};

/// Probabilities are clamped here before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

fn check_label(probs: &[f64], label: usize) -> Result<f64> {
    probs
        .get(label)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("label {} out of range for {} classes", label, probs.len())))
}

/// `-alpha (1 - p)^gamma ln p` with `p` the probability of the true class.
pub fn focal_loss(probs: &[f64], label: usize, alpha: f64, gamma: f64) -> Result<f64> {
    let p = check_label(probs, label)?.clamp(LOG_FLOOR, 1.0);
    Ok(-alpha * (1.0 - p).powf(gamma) * p.ln())
}

/// Loss and its derivative with respect to every class probability.
pub fn focal_loss_grad(probs: &[f64], label: usize, alpha: f64, gamma: f64) -> Result<(f64, Vec<f64>)> {
    let loss = focal_loss(probs, label, alpha, gamma)?;
    let p = probs[label].clamp(LOG_FLOOR, 1.0);
    let q = 1.0 - p;
    // d/dp [-alpha q^gamma ln p] = alpha (gamma q^(gamma-1) ln p - q^gamma / p)
    let lead = if gamma == 0.0 { 0.0 } else { gamma * q.powf(gamma - 1.0) * p.ln() };
    let mut g = vec![0.0; probs.len()];
    g[label] = alpha * (lead - q.powf(gamma) / p);
    Ok((loss, g))
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    Ok(-check_label(probs, label)?.clamp(LOG_FLOOR, 1.0).ln())
}

/// `sum_p W(p) (-ln P_{M(p)}(p)) / sum_p W(p)` over a dense probability map.
pub fn weighted_cross_entropy(probs: &ScoreMap, labels: &[usize], weights: &[f64]) -> Result<f64> {
    Ok(weighted_ce_terms(probs, labels, weights)?.0 / total_weight(weights)?)
}

pub(crate) fn total_weight(weights: &[f64]) -> Result<f64> {
    let t: f64 = weights.iter().sum();
    if t <= 0.0 {
        return Err(Error::Precondition("weighted loss needs a positive total weight".into()));
    }
    Ok(t)
}

/// Unnormalised weighted loss sum and its gradient with respect to the probabilities.
pub(crate) fn weighted_ce_terms(probs: &ScoreMap, labels: &[usize], weights: &[f64]) -> Result<(f64, ScoreMap)> {
    let n = probs.plane_len();
    if labels.len() != n || weights.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities per class, {} labels, {} weights",
            n,
            labels.len(),
            weights.len()
        )));
    }
    let mut grad = ScoreMap::zeros(probs.classes, probs.height, probs.width);
    let mut sum = 0.0;
    for p in 0..n {
        let w = weights[p];
        if w == 0.0 {
            continue;
        }
        let k = labels[p];
        if k >= probs.classes {
            return Err(Error::InvalidArgument(format!("label {} out of range", k)));
        }
        let v = probs.data[k * n + p].clamp(LOG_FLOOR, 1.0);
        sum -= w * v.ln();
        grad.data[k * n + p] = -w / v;
    }
    Ok((sum, grad))
}
