use std::collections::BTreeMap;

use crate::ctensor::CTensor;
use crate::error::{Error, Result};
use crate::nets::{NetworkParams, ParamGrads};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments for one flat block of real values.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Adam over every real number of the trainable groups; real and imaginary
/// planes are simply separate coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub step: u64,
    moments: BTreeMap<String, Moments>,
}

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for i in 0..p.len() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        p[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
    }
}

fn check(t: &CTensor, g: &CTensor, name: &str) -> Result<()> {
    if t.shape() != g.shape() {
        return Err(Error::ShapeMismatch(format!(
            "gradient {:?} for '{}' does not match parameters {:?}",
            g.shape(),
            name,
            t.shape()
        )));
    }
    Ok(())
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    /// One bias-corrected update; frozen groups are left untouched whatever their gradient.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &ParamGrads, lr: f64) -> Result<()> {
        for (name, (gw, gb)) in &grads.convs {
            if let Some(l) = params.convs.get(name) {
                check(&l.weights, gw, name)?;
                check(&l.bias, gb, name)?;
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        for (name, (gw, gb)) in &grads.convs {
            if !params.is_trainable(name) {
                continue;
            }
            let l = params
                .convs
                .get_mut(name)
                .ok_or_else(|| Error::InvalidNetwork(format!("gradient for unknown group '{}'", name)))?;
            let nw = l.weights.len();
            let nb = l.bias.len();
            let mo = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| Moments::new(2 * nw + 2 * nb));
            let (m, v) = (&mut mo.m, &mut mo.v);
            let (wr, wi) = l.weights.planes_mut();
            update(wr, gw.re(), &mut m[..nw], &mut v[..nw], lr, c1, c2);
            update(wi, gw.im(), &mut m[nw..2 * nw], &mut v[nw..2 * nw], lr, c1, c2);
            let (br, bi) = l.bias.planes_mut();
            update(br, gb.re(), &mut m[2 * nw..2 * nw + nb], &mut v[2 * nw..2 * nw + nb], lr, c1, c2);
            update(bi, gb.im(), &mut m[2 * nw + nb..], &mut v[2 * nw + nb..], lr, c1, c2);
        }
        for (name, g) in &grads.heads {
            if !params.is_trainable(name) {
                continue;
            }
            let h = params
                .heads
                .get_mut(name)
                .ok_or_else(|| Error::InvalidNetwork(format!("gradient for unknown head '{}'", name)))?;
            let mo = self.moments.entry(name.clone()).or_insert_with(|| Moments::new(5));
            let mut a = h.to_array();
            update(&mut a, g, &mut mo.m, &mut mo.v, lr, c1, c2);
            *h = crate::cops::HeadParams::from_array(a);
        }
        Ok(())
    }
}
