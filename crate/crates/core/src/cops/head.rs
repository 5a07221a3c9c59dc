//! Classification head: a 4 -> 1 linear map over the real part, imaginary part,
//! amplitude and phase of each class channel, followed by a softmax over classes.

use serde::{Deserialize, Serialize};

use crate::ctensor::{polar_scalar, CTensor, ScoreMap, EPS_PHASE};
use crate::error::{Error, Result};

/// Weights shared by every class channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub w_re: f64,
    pub w_im: f64,
    pub w_mag: f64,
    pub w_phase: f64,
    pub bias: f64,
}

impl HeadParams {
    /// Starts as a projection onto the real part.
    pub const REAL_PROJECTION: HeadParams = HeadParams {
        w_re: 1.0,
        w_im: 0.0,
        w_mag: 0.0,
        w_phase: 0.0,
        bias: 0.0,
    };

    pub const ZERO: HeadParams = HeadParams {
        w_re: 0.0,
        w_im: 0.0,
        w_mag: 0.0,
        w_phase: 0.0,
        bias: 0.0,
    };

    pub fn to_array(self) -> [f64; 5] {
        [self.w_re, self.w_im, self.w_mag, self.w_phase, self.bias]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            w_re: a[0],
            w_im: a[1],
            w_mag: a[2],
            w_phase: a[3],
            bias: a[4],
        }
    }
}

impl Default for HeadParams {
    fn default() -> Self {
        Self::REAL_PROJECTION
    }
}

/// Scores `w_re re + w_im im + w_mag |z| + w_phase arg z + bias` for a `[cls, h, w]` tensor.
pub fn riap_head(z: &CTensor, head: &HeadParams) -> Result<ScoreMap> {
    let (cls, h, w) = z.dims3()?;
    let data: Vec<f64> = z
        .re()
        .iter()
        .zip(z.im())
        .map(|(&r, &i)| {
            let (mag, phase) = polar_scalar(r, i);
            head.w_re * r + head.w_im * i + head.w_mag * mag + head.w_phase * phase + head.bias
        })
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("riap_head"));
    }
    Ok(ScoreMap {
        classes: cls,
        height: h,
        width: w,
        data,
    })
}

/// Gradients with respect to the complex input and the five head parameters.
pub fn riap_head_backward(grad: &ScoreMap, z: &CTensor, head: &HeadParams) -> Result<(CTensor, HeadParams)> {
    let (cls, h, w) = z.dims3()?;
    if (grad.classes, grad.height, grad.width) != (cls, h, w) {
        return Err(Error::ShapeMismatch("head gradient shape".into()));
    }
    let n = z.len();
    let mut dr = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut dh = [0.0; 5];
    for idx in 0..n {
        let (r, i) = z.get(idx);
        let g = grad.data[idx];
        let (mag, phase) = polar_scalar(r, i);
        dh[0] += g * r;
        dh[1] += g * i;
        dh[2] += g * mag;
        dh[3] += g * phase;
        dh[4] += g;
        let (mut gr, mut gi) = (head.w_re, head.w_im);
        if mag >= EPS_PHASE {
            gr += head.w_mag * r / mag - head.w_phase * i / (mag * mag);
            gi += head.w_mag * i / mag + head.w_phase * r / (mag * mag);
        }
        dr[idx] = g * gr;
        di[idx] = g * gi;
    }
    Ok((
        CTensor::from_planes_unchecked(z.shape().to_vec(), dr, di),
        HeadParams::from_array(dh),
    ))
}

/// Max-subtracted softmax of one score vector.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Softmax over the class axis at every pixel.
pub fn softmax_probs(scores: &ScoreMap) -> ScoreMap {
    let n = scores.plane_len();
    let k = scores.classes;
    let mut data = vec![0.0; scores.data.len()];
    let mut buf = vec![0.0; k];
    for p in 0..n {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = scores.data[c * n + p];
        }
        for (c, v) in softmax(&buf).into_iter().enumerate() {
            data[c * n + p] = v;
        }
    }
    ScoreMap {
        data,
        ..scores.clone()
    }
}

/// Chain rule through softmax for one pixel: `ds_j = p_j (dp_j - sum_k p_k dp_k)`.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(grad_probs).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(grad_probs)
        .map(|(p, g)| p * (g - dot))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_head_reads_real_plane() {
        let z = CTensor::from_planes(&[2, 1, 2], vec![1.0, -2.0, 0.5, 4.0], vec![3.0, 1.0, 0.0, 2.0]).unwrap();
        let s = riap_head(&z, &HeadParams::REAL_PROJECTION).unwrap();
        assert_eq!(s.data, z.re());
    }

    #[test]
    fn magnitude_head() {
        let z = CTensor::from_planes(&[1, 1, 1], vec![3.0], vec![4.0]).unwrap();
        let head = HeadParams {
            w_mag: 1.0,
            ..HeadParams::ZERO
        };
        assert!((riap_head(&z, &head).unwrap().data[0] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn origin_has_zero_polar_gradient() {
        let z = CTensor::zeros(&[1, 1, 1]);
        let head = HeadParams {
            w_re: 0.5,
            w_im: -0.25,
            w_mag: 3.0,
            w_phase: 2.0,
            bias: 0.0,
        };
        let g = ScoreMap {
            classes: 1,
            height: 1,
            width: 1,
            data: vec![1.0],
        };
        let (dz, _) = riap_head_backward(&g, &z, &head).unwrap();
        assert_eq!(dz.get(0), (0.5, -0.25));
    }

    #[test]
    fn softmax_cases() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let a = softmax(&[1.0, 1.5, 2.0]);
        let b = softmax(&[101.0, 101.5, 102.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let big = softmax(&[1000.0, -1000.0, 999.0]);
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_map_normalises_each_pixel() {
        let s = ScoreMap {
            classes: 3,
            height: 1,
            width: 2,
            data: vec![0.1, 5.0, -2.0, 3.0, 0.7, 0.7],
        };
        let p = softmax_probs(&s);
        for x in 0..2 {
            let sum: f64 = (0..3).map(|k| p.at(k, 0, x)).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
