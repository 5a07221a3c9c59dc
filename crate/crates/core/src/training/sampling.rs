use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A labelled training pixel; `class` is the internal 0-based index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TrainPixel {
    pub y: usize,
    pub x: usize,
    pub class: usize,
}

/// Number drawn from a class of `total` pixels: the per-class request capped by the sampling rate.
pub fn class_quota(total: usize, per_class_count: usize, max_rate: f64) -> usize {
    // the small epsilon keeps exact products such as 0.07 * 100 from flooring to 6
    let by_rate = (max_rate * total as f64 + 1e-9).floor() as usize;
    per_class_count.min(by_rate).min(total)
}

/// Draws pixels uniformly without replacement per class, in class order, from one seeded stream.
///
/// Labels use `0` for unlabelled pixels and `1..=classes` otherwise. The result
/// is sorted by class, then raster position.
pub fn sample_training_pixels(
    labels: &[u16],
    width: usize,
    classes: usize,
    per_class_count: usize,
    max_rate: f64,
    seed: u64,
) -> Result<Vec<TrainPixel>> {
    if width == 0 || labels.len() % width != 0 {
        return Err(Error::ShapeMismatch(format!("{} labels do not form rows of width {}", labels.len(), width)));
    }
    if !(max_rate > 0.0 && max_rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("sampling rate must be in (0, 1], got {}", max_rate)));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let k = l as usize - 1;
        if k >= classes {
            return Err(Error::InvalidArgument(format!("label {} exceeds {} classes", l, classes)));
        }
        members[k].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (k, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(Error::Precondition(format!("class {} has no labelled pixels", k + 1)));
        }
        let n = class_quota(m.len(), per_class_count, max_rate);
        let mut picked: Vec<usize> = sample(&mut rng, m.len(), n).into_iter().map(|j| m[j]).collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| TrainPixel {
            y: i / width,
            x: i % width,
            class: k,
        }));
    }
    Ok(out)
}

/// Pseudo-labels `M` and per-pixel loss weights `W` for the second training step.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedLabels {
    pub height: usize,
    pub width: usize,
    pub m: Vec<usize>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w_train: f64,
    pub w_error: f64,
    pub w_else: f64,
}

/// Starts from the dense prediction `o`; every training pixel takes its true
/// label and the weight `w_train` (correctly predicted) or `w_error` (mispredicted).
pub fn refine_score_map(
    o: &[usize],
    height: usize,
    width: usize,
    pixels: &[TrainPixel],
    weights: LossWeights,
) -> Result<RefinedLabels> {
    if o.len() != height * width {
        return Err(Error::ShapeMismatch(format!("label map has {} pixels, expected {}x{}", o.len(), height, width)));
    }
    let mut m = o.to_vec();
    let mut w = vec![weights.w_else; o.len()];
    for p in pixels {
        if p.y >= height || p.x >= width {
            return Err(Error::Dimension(format!(
                "training pixel ({}, {}) outside the {}x{} map",
                p.y, p.x, height, width
            )));
        }
        let i = p.y * width + p.x;
        w[i] = if o[i] == p.class { weights.w_train } else { weights.w_error };
        m[i] = p.class;
    }
    Ok(RefinedLabels { height, width, m, w })
}
