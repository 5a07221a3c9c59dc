use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::cops::{CConvLayer, HeadParams};
use crate::ctensor::CTensor;
use crate::error::{Error, Result};

/// Named parameter groups shared by every architecture built from the same weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkParams {
    pub convs: BTreeMap<String, CConvLayer>,
    pub heads: BTreeMap<String, HeadParams>,
    /// Groups excluded from gradient computation and updates.
    pub frozen: BTreeSet<String>,
}

impl NetworkParams {
    pub fn conv(&self, name: &str) -> Result<&CConvLayer> {
        self.convs
            .get(name)
            .ok_or_else(|| Error::InvalidNetwork(format!("missing convolution parameters '{}'", name)))
    }

    pub fn head(&self, name: &str) -> Result<&HeadParams> {
        self.heads
            .get(name)
            .ok_or_else(|| Error::InvalidNetwork(format!("missing head parameters '{}'", name)))
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        !self.frozen.contains(name)
    }

    /// Real degrees of freedom over all groups (the head counts five).
    pub fn param_count(&self) -> usize {
        self.convs.values().map(CConvLayer::param_count).sum::<usize>() + 5 * self.heads.len()
    }

    pub fn trainable_count(&self) -> usize {
        self.convs
            .iter()
            .filter(|(n, _)| self.is_trainable(n))
            .map(|(_, l)| l.param_count())
            .sum::<usize>()
            + 5 * self.heads.keys().filter(|n| self.is_trainable(n)).count()
    }
}

/// Gradients keyed like [`NetworkParams`]; only trainable groups appear.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamGrads {
    pub convs: BTreeMap<String, (CTensor, CTensor)>,
    pub heads: BTreeMap<String, [f64; 5]>,
}

fn add_into(dst: &mut CTensor, src: &CTensor) {
    let (dr, di) = dst.planes_mut();
    for (a, b) in dr.iter_mut().zip(src.re()) {
        *a += b;
    }
    for (a, b) in di.iter_mut().zip(src.im()) {
        *a += b;
    }
}

fn scale_tensor(t: &mut CTensor, s: f64) {
    let (r, i) = t.planes_mut();
    r.iter_mut().chain(i.iter_mut()).for_each(|v| *v *= s);
}

impl ParamGrads {
    pub fn add_conv(&mut self, name: &str, w: CTensor, b: CTensor) {
        match self.convs.get_mut(name) {
            Some((gw, gb)) => {
                add_into(gw, &w);
                add_into(gb, &b);
            }
            None => {
                self.convs.insert(name.to_string(), (w, b));
            }
        }
    }

    pub fn add_head(&mut self, name: &str, h: [f64; 5]) {
        let e = self.heads.entry(name.to_string()).or_insert([0.0; 5]);
        for (a, b) in e.iter_mut().zip(h) {
            *a += b;
        }
    }

    pub fn merge(&mut self, other: ParamGrads) {
        for (k, (w, b)) in other.convs {
            self.add_conv(&k, w, b);
        }
        for (k, h) in other.heads {
            self.add_head(&k, h);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in self.convs.values_mut() {
            scale_tensor(w, s);
            scale_tensor(b, s);
        }
        for h in self.heads.values_mut() {
            h.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Each kernel plane uniform on `+-sqrt(3 / fan_in)`; bias zero.
pub fn init_layer<R: Rng>(rng: &mut R, shape: [usize; 4], fan_in: usize) -> CConvLayer {
    let bound = (3.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let re: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    let im: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    let bias_len = shape[0];
    CConvLayer {
        weights: CTensor::from_planes_unchecked(shape.to_vec(), re, im),
        bias: CTensor::zeros(&[bias_len]),
    }
}

/// Convolution kernel `[out, in, k, k]` with `fan_in = k^2 * in * 2`.
pub fn init_conv<R: Rng>(rng: &mut R, out: usize, inp: usize, k: usize) -> CConvLayer {
    init_layer(rng, [out, inp, k, k], k * k * inp * 2)
}

/// Transposed kernel `[in, out, 2, 2]`; each output pixel receives one tap per input
/// channel, so `fan_in = in * 2`. The bias has `out` entries.
pub fn init_transconv<R: Rng>(rng: &mut R, inp: usize, out: usize) -> CConvLayer {
    let mut l = init_layer(rng, [inp, out, 2, 2], inp * 2);
    l.bias = CTensor::zeros(&[out]);
    l
}
