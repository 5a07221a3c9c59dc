//! Complex ReLU: each plane is rectified on its own.

use crate::ctensor::CTensor;
use crate::error::{Error, Result};

#[inline]
fn rect(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub fn crelu(x: &CTensor) -> CTensor {
    let re = x.re().iter().map(|&v| rect(v)).collect();
    let im = x.im().iter().map(|&v| rect(v)).collect();
    CTensor::from_planes_unchecked(x.shape().to_vec(), re, im)
}

/// Passes the upstream gradient of each plane where the forward input of that plane was positive.
pub fn crelu_backward(grad_out: &CTensor, x: &CTensor) -> Result<CTensor> {
    if grad_out.shape() != x.shape() {
        return Err(Error::ShapeMismatch(format!(
            "crelu gradient {:?} vs input {:?}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let mask = |g: &[f64], v: &[f64]| -> Vec<f64> {
        g.iter()
            .zip(v)
            .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
            .collect()
    };
    Ok(CTensor::from_planes_unchecked(
        x.shape().to_vec(),
        mask(grad_out.re(), x.re()),
        mask(grad_out.im(), x.im()),
    ))
}
