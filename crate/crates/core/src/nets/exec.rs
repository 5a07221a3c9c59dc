//! Graph executor: forward passes that either stream (freeing values after
//! their last use) or keep a full trace for the backward pass.

use std::collections::BTreeMap;

use super::params::{NetworkParams, ParamGrads};
use super::spec::{NetworkSpec, Op, Resolved, Src};
use crate::cops::conv::conv_backward_impl;
use crate::cops::{
    cconv2d, cmaxpool2d, cmaxpool2d_backward, crelu, crelu_backward, ctransconv2d, ctransconv2d_backward,
    riap_head, riap_head_backward, softmax_backward, softmax_probs, PoolRecord,
};
use crate::ctensor::{concat_channels, mirror_pad, reflect_index, CTensor, ScoreMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Complex(CTensor),
    Real(ScoreMap),
}

impl Value {
    pub fn complex(&self) -> Result<&CTensor> {
        match self {
            Value::Complex(t) => Ok(t),
            Value::Real(_) => Err(Error::InvalidNetwork("expected a complex value".into())),
        }
    }

    pub fn real(&self) -> Result<&ScoreMap> {
        match self {
            Value::Real(s) => Ok(s),
            Value::Complex(_) => Err(Error::InvalidNetwork("expected real scores".into())),
        }
    }

    pub fn into_complex(self) -> Result<CTensor> {
        match self {
            Value::Complex(t) => Ok(t),
            Value::Real(_) => Err(Error::InvalidNetwork("expected a complex value".into())),
        }
    }

    pub fn into_real(self) -> Result<ScoreMap> {
        match self {
            Value::Real(s) => Ok(s),
            Value::Complex(_) => Err(Error::InvalidNetwork("expected real scores".into())),
        }
    }

    fn accumulate(&mut self, other: Value) -> Result<()> {
        match (self, other) {
            (Value::Complex(a), Value::Complex(b)) if a.shape() == b.shape() => {
                let (ar, ai) = a.planes_mut();
                ar.iter_mut().zip(b.re()).for_each(|(x, y)| *x += y);
                ai.iter_mut().zip(b.im()).for_each(|(x, y)| *x += y);
                Ok(())
            }
            (Value::Real(a), Value::Real(b)) if a.data.len() == b.data.len() => {
                a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
                Ok(())
            }
            _ => Err(Error::ShapeMismatch("gradient accumulation across mismatched values".into())),
        }
    }
}

/// Forward values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    input: CTensor,
    values: Vec<Option<Value>>,
    pools: Vec<Option<PoolRecord>>,
}

impl Trace {
    pub fn output(&self) -> &Value {
        self.values.last().and_then(Option::as_ref).expect("network output is always computed")
    }
}

/// Outputs of parameter-free or frozen layers that feed trainable ones,
/// reusable across training steps on the same input.
#[derive(Debug, Clone)]
pub struct FrozenCache {
    values: Vec<Option<Value>>,
}

pub struct Executor<'a> {
    spec: &'a NetworkSpec,
    params: &'a NetworkParams,
    res: Resolved,
    /// Layer output depends on at least one trainable group.
    requires: Vec<bool>,
}

fn mirror_pad_backward(g: &CTensor, margin: usize, shape: &[usize]) -> Result<CTensor> {
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let (_, oh, ow) = g.dims3()?;
    let mut out = CTensor::zeros(shape);
    let (dr, di) = out.planes_mut();
    let (gr, gi) = (g.re(), g.im());
    for ch in 0..c {
        for oy in 0..oh {
            let sy = reflect_index(oy as isize - margin as isize, h);
            for ox in 0..ow {
                let sx = reflect_index(ox as isize - margin as isize, w);
                let s = (ch * oh + oy) * ow + ox;
                let d = (ch * h + sy) * w + sx;
                dr[d] += gr[s];
                di[d] += gi[s];
            }
        }
    }
    Ok(out)
}

/// Offset of a centre crop (odd surplus goes to the bottom/right).
fn crop_origin(from: usize, to: usize) -> usize {
    (from - to) / 2
}

impl<'a> Executor<'a> {
    pub fn new(spec: &'a NetworkSpec, params: &'a NetworkParams) -> Result<Self> {
        let res = spec.resolve()?;
        let mut requires = vec![false; spec.layers.len()];
        for (i, l) in spec.layers.iter().enumerate() {
            let own = l.op.param().is_some_and(|p| params.is_trainable(p));
            let upstream = [Some(res.primary[i]), res.secondary[i]]
                .into_iter()
                .flatten()
                .any(|s| matches!(s, Src::Layer(j) if requires[j]));
            requires[i] = own || upstream;
        }
        Ok(Self {
            spec,
            params,
            res,
            requires,
        })
    }

    pub fn requires_grad(&self) -> &[bool] {
        &self.requires
    }

    fn eval(&self, i: usize, a: &Value, b: Option<&Value>, keep_pool: bool) -> Result<(Value, Option<PoolRecord>)> {
        let l = &self.spec.layers[i];
        Ok(match &l.op {
            Op::Conv { param, geometry } => {
                (Value::Complex(cconv2d(a.complex()?, self.params.conv(param)?, *geometry)?), None)
            }
            Op::TransConv { param } => (Value::Complex(ctransconv2d(a.complex()?, self.params.conv(param)?)?), None),
            Op::Relu => (Value::Complex(crelu(a.complex()?)), None),
            Op::MaxPool { geometry } => {
                let r = cmaxpool2d(a.complex()?, *geometry)?;
                if keep_pool {
                    (Value::Complex(r.output.clone()), Some(r))
                } else {
                    (Value::Complex(r.output), None)
                }
            }
            Op::MirrorPad { margin } => (Value::Complex(mirror_pad(a.complex()?, *margin)?), None),
            Op::CropConcat { .. } => {
                let cur = a.complex()?;
                let tap = b.expect("crop-concat has a tap").complex()?;
                let (_, h, w) = cur.dims3()?;
                let (_, th, tw) = tap.dims3()?;
                if th < h || tw < w {
                    return Err(Error::Dimension(format!("tap {}x{} smaller than {}x{}", th, tw, h, w)));
                }
                let cropped = tap.crop(crop_origin(th, h), crop_origin(tw, w), h, w)?;
                (Value::Complex(concat_channels(&cropped, cur)?), None)
            }
            Op::Head { param } => (Value::Real(riap_head(a.complex()?, self.params.head(param)?)?), None),
            Op::Softmax => (Value::Real(softmax_probs(a.real()?)), None),
        })
    }

    fn check_input(&self, x: &CTensor) -> Result<()> {
        let (c, _, _) = x.dims3()?;
        if c != self.spec.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} input channels, got {}",
                self.spec.in_channels, c
            )));
        }
        Ok(())
    }

    /// Streaming forward pass; returns the output and the requested taps.
    pub fn infer(&self, x: &CTensor, keep_taps: &[&str]) -> Result<(Value, BTreeMap<String, Value>)> {
        self.check_input(x)?;
        let n = self.spec.layers.len();
        let input = Value::Complex(x.clone());
        let keep: Vec<usize> = keep_taps
            .iter()
            .map(|t| {
                self.res
                    .taps
                    .get(*t)
                    .copied()
                    .ok_or_else(|| Error::InvalidNetwork(format!("unknown tap '{}'", t)))
            })
            .collect::<Result<_>>()?;
        let mut values: Vec<Option<Value>> = vec![None; n];
        for i in 0..n {
            let fetch = |s: Src| -> &Value {
                match s {
                    Src::Input => &input,
                    Src::Layer(j) => values[j].as_ref().expect("value alive until last use"),
                }
            };
            let a = fetch(self.res.primary[i]);
            let b = self.res.secondary[i].map(fetch);
            let (v, _) = self.eval(i, a, b, false)?;
            values[i] = Some(v);
            for s in [Some(self.res.primary[i]), self.res.secondary[i]].into_iter().flatten() {
                if let Src::Layer(j) = s {
                    if self.res.last_use[j] == i && !keep.contains(&j) {
                        values[j] = None;
                    }
                }
            }
        }
        let taps = keep_taps
            .iter()
            .map(|t| {
                let j = self.res.taps[*t];
                (t.to_string(), values[j].clone().expect("kept tap"))
            })
            .collect();
        Ok((values[n - 1].take().expect("output"), taps))
    }

    /// Full forward pass keeping everything the backward pass needs. Frozen
    /// layers are taken from `cache` when given.
    pub fn forward(&self, x: &CTensor, cache: Option<&FrozenCache>) -> Result<Trace> {
        self.check_input(x)?;
        let n = self.spec.layers.len();
        let input = Value::Complex(x.clone());
        let mut values: Vec<Option<Value>> = vec![None; n];
        let mut pools: Vec<Option<PoolRecord>> = vec![None; n];
        for i in 0..n {
            if let Some(c) = cache {
                if !self.requires[i] {
                    values[i] = c.values[i].clone();
                    continue;
                }
            }
            let fetch = |s: Src| -> Result<&Value> {
                match s {
                    Src::Input => Ok(&input),
                    Src::Layer(j) => values[j]
                        .as_ref()
                        .ok_or_else(|| Error::InvalidNetwork("frozen cache does not cover a needed value".into())),
                }
            };
            let a = fetch(self.res.primary[i])?;
            let b = match self.res.secondary[i] {
                Some(s) => Some(fetch(s)?),
                None => None,
            };
            let (v, p) = self.eval(i, a, b, self.requires[i])?;
            values[i] = Some(v);
            pools[i] = p;
        }
        Ok(Trace {
            input: x.clone(),
            values,
            pools,
        })
    }

    /// Keeps the frozen values that trainable layers (or the output) read.
    pub fn freeze(&self, trace: &Trace) -> FrozenCache {
        let n = self.spec.layers.len();
        let mut needed = vec![false; n];
        needed[n - 1] = !self.requires[n - 1];
        for i in 0..n {
            if !self.requires[i] {
                continue;
            }
            for s in [Some(self.res.primary[i]), self.res.secondary[i]].into_iter().flatten() {
                if let Src::Layer(j) = s {
                    if !self.requires[j] {
                        needed[j] = true;
                    }
                }
            }
        }
        FrozenCache {
            values: (0..n)
                .map(|i| if needed[i] { trace.values[i].clone() } else { None })
                .collect(),
        }
    }

    fn value<'t>(&self, trace: &'t Trace, s: Src) -> Result<&'t CTensor> {
        match s {
            Src::Input => Ok(&trace.input),
            Src::Layer(j) => trace.values[j]
                .as_ref()
                .ok_or_else(|| Error::InvalidNetwork("trace is missing a value".into()))?
                .complex(),
        }
    }

    fn src_requires(&self, s: Src) -> bool {
        matches!(s, Src::Layer(j) if self.requires[j])
    }

    /// Backpropagates `grad_out` (shaped like the output) into the trainable groups.
    pub fn backward(&self, trace: &Trace, grad_out: Value) -> Result<ParamGrads> {
        let n = self.spec.layers.len();
        let mut grads: Vec<Option<Value>> = vec![None; n];
        grads[n - 1] = Some(grad_out);
        let mut out = ParamGrads::default();
        let push = |grads: &mut Vec<Option<Value>>, s: Src, g: Value| -> Result<()> {
            if let Src::Layer(j) = s {
                if self.requires[j] {
                    match &mut grads[j] {
                        Some(acc) => acc.accumulate(g)?,
                        slot => *slot = Some(g),
                    }
                }
            }
            Ok(())
        };
        for i in (0..n).rev() {
            if !self.requires[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let src = self.res.primary[i];
            match &self.spec.layers[i].op {
                Op::Conv { param, geometry } => {
                    let want = self.src_requires(src);
                    let b = conv_backward_impl(
                        g.complex()?,
                        self.value(trace, src)?,
                        self.params.conv(param)?,
                        *geometry,
                        want,
                    )?;
                    if self.params.is_trainable(param) {
                        out.add_conv(param, b.grad_weights, b.grad_bias);
                    }
                    if want {
                        push(&mut grads, src, Value::Complex(b.grad_input))?;
                    }
                }
                Op::TransConv { param } => {
                    let b = ctransconv2d_backward(g.complex()?, self.value(trace, src)?, self.params.conv(param)?)?;
                    if self.params.is_trainable(param) {
                        out.add_conv(param, b.grad_weights, b.grad_bias);
                    }
                    push(&mut grads, src, Value::Complex(b.grad_input))?;
                }
                Op::Relu => {
                    let d = crelu_backward(g.complex()?, self.value(trace, src)?)?;
                    push(&mut grads, src, Value::Complex(d))?;
                }
                Op::MaxPool { .. } => {
                    let rec = trace.pools[i]
                        .as_ref()
                        .ok_or_else(|| Error::InvalidNetwork("missing pool record".into()))?;
                    push(&mut grads, src, Value::Complex(cmaxpool2d_backward(g.complex()?, rec)?))?;
                }
                Op::MirrorPad { margin } => {
                    if self.src_requires(src) {
                        let shape = self.value(trace, src)?.shape().to_vec();
                        push(&mut grads, src, Value::Complex(mirror_pad_backward(g.complex()?, *margin, &shape)?))?;
                    }
                }
                Op::CropConcat { .. } => {
                    let tap_src = self.res.secondary[i].expect("crop-concat has a tap");
                    let g = g.complex()?;
                    let (_, h, w) = g.dims3()?;
                    let tap = self.value(trace, tap_src)?;
                    let (tc, th, tw) = tap.dims3()?;
                    let plane = h * w;
                    if self.src_requires(src) {
                        let rest = g.len() - tc * plane;
                        let cur = CTensor::from_planes_unchecked(
                            self.value(trace, src)?.shape().to_vec(),
                            g.re()[tc * plane..].to_vec(),
                            g.im()[tc * plane..].to_vec(),
                        );
                        debug_assert_eq!(cur.len(), rest);
                        push(&mut grads, src, Value::Complex(cur))?;
                    }
                    if self.src_requires(tap_src) {
                        let (y0, x0) = (crop_origin(th, h), crop_origin(tw, w));
                        let mut gt = CTensor::zeros(tap.shape());
                        let (dr, di) = gt.planes_mut();
                        for c in 0..tc {
                            for y in 0..h {
                                let s = c * plane + y * w;
                                let d = (c * th + y0 + y) * tw + x0;
                                dr[d..d + w].copy_from_slice(&g.re()[s..s + w]);
                                di[d..d + w].copy_from_slice(&g.im()[s..s + w]);
                            }
                        }
                        push(&mut grads, tap_src, Value::Complex(gt))?;
                    }
                }
                Op::Head { param } => {
                    let (dz, dh) = riap_head_backward(g.real()?, self.value(trace, src)?, self.params.head(param)?)?;
                    if self.params.is_trainable(param) {
                        out.add_head(param, dh.to_array());
                    }
                    push(&mut grads, src, Value::Complex(dz))?;
                }
                Op::Softmax => {
                    let probs = trace.values[i].as_ref().expect("softmax output").real()?;
                    let g = g.real()?;
                    let (k, np) = (probs.classes, probs.plane_len());
                    let mut ds = ScoreMap::zeros(k, probs.height, probs.width);
                    let mut pv = vec![0.0; k];
                    let mut gv = vec![0.0; k];
                    for p in 0..np {
                        if (0..k).all(|c| g.data[c * np + p] == 0.0) {
                            continue;
                        }
                        for c in 0..k {
                            pv[c] = probs.data[c * np + p];
                            gv[c] = g.data[c * np + p];
                        }
                        for (c, v) in softmax_backward(&pv, &gv).into_iter().enumerate() {
                            ds.data[c * np + p] = v;
                        }
                    }
                    push(&mut grads, src, Value::Real(ds))?;
                }
            }
        }
        Ok(out)
    }
}
