use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::NetworkParams;
use crate::cops::{ConvGeometry, PoolGeometry, UPSAMPLE};
use crate::error::{Error, Result};

/// Name by which a layer refers to the network input.
pub const INPUT: &str = "input";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Op {
    Conv { param: String, geometry: ConvGeometry },
    TransConv { param: String },
    Relu,
    MaxPool { geometry: PoolGeometry },
    MirrorPad { margin: usize },
    /// Centre-crops the tap to the current extent and stacks it before the current channels.
    CropConcat { tap: String },
    Head { param: String },
    Softmax,
}

impl Op {
    pub fn param(&self) -> Option<&str> {
        match self {
            Op::Conv { param, .. } | Op::TransConv { param } | Op::Head { param } => Some(param),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub op: Op,
    /// `None` reads the previous layer, [`INPUT`] the network input, anything else a tap.
    pub input: Option<String>,
    /// Publishes this layer's output under a name.
    pub tap: Option<String>,
}

impl LayerSpec {
    pub fn new(name: &str, op: Op) -> Self {
        Self {
            name: name.into(),
            op,
            input: None,
            tap: None,
        }
    }

    pub fn from(mut self, input: &str) -> Self {
        self.input = Some(input.into());
        self
    }

    pub fn tap(mut self, tap: &str) -> Self {
        self.tap = Some(tap.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    CsCnn,
    Dilated,
    Crpm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetKind,
    pub in_channels: usize,
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

/// Where a layer reads a value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Src {
    Input,
    Layer(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Resolved {
    pub primary: Vec<Src>,
    pub secondary: Vec<Option<Src>>,
    /// Index of the last layer consuming each layer's output.
    pub last_use: Vec<usize>,
    pub taps: BTreeMap<String, usize>,
}

/// Shape of a layer output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueShape {
    Complex(usize, usize, usize),
    Real(usize, usize, usize),
}

impl ValueShape {
    pub fn dims(&self) -> (usize, usize, usize) {
        match *self {
            ValueShape::Complex(c, h, w) | ValueShape::Real(c, h, w) => (c, h, w),
        }
    }
}

impl NetworkSpec {
    pub(crate) fn resolve(&self) -> Result<Resolved> {
        let n = self.layers.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        let mut taps = BTreeMap::new();
        let mut names = std::collections::BTreeSet::new();
        let mut primary = Vec::with_capacity(n);
        let mut secondary = Vec::with_capacity(n);
        let lookup = |taps: &BTreeMap<String, usize>, t: &str| -> Result<Src> {
            if t == INPUT {
                return Ok(Src::Input);
            }
            taps.get(t)
                .map(|&i| Src::Layer(i))
                .ok_or_else(|| Error::InvalidNetwork(format!("unknown tap '{}'", t)))
        };
        for (i, l) in self.layers.iter().enumerate() {
            if !names.insert(l.name.clone()) {
                return Err(Error::InvalidNetwork(format!("duplicate layer name '{}'", l.name)));
            }
            primary.push(match &l.input {
                None if i == 0 => Src::Input,
                None => Src::Layer(i - 1),
                Some(t) => lookup(&taps, t)?,
            });
            secondary.push(match &l.op {
                Op::CropConcat { tap } => Some(lookup(&taps, tap)?),
                _ => None,
            });
            if let Some(t) = &l.tap {
                if t == INPUT || taps.insert(t.clone(), i).is_some() {
                    return Err(Error::InvalidNetwork(format!("duplicate tap '{}'", t)));
                }
            }
        }
        let mut last_use: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for s in [Some(primary[i]), secondary[i]].into_iter().flatten() {
                if let Src::Layer(j) = s {
                    last_use[j] = last_use[j].max(i);
                }
            }
        }
        last_use[n - 1] = n;
        Ok(Resolved {
            primary,
            secondary,
            last_use,
            taps,
        })
    }

    /// Validates the graph against `params` and returns every layer's output shape.
    pub fn output_shapes(&self, params: &NetworkParams, input: (usize, usize, usize)) -> Result<Vec<ValueShape>> {
        let res = self.resolve()?;
        let mut shapes: Vec<ValueShape> = Vec::with_capacity(self.layers.len());
        let get = |shapes: &[ValueShape], s: Src| match s {
            Src::Input => ValueShape::Complex(input.0, input.1, input.2),
            Src::Layer(j) => shapes[j],
        };
        let complex = |s: ValueShape, l: &LayerSpec| match s {
            ValueShape::Complex(c, h, w) => Ok((c, h, w)),
            _ => Err(Error::InvalidNetwork(format!("layer '{}' needs a complex input", l.name))),
        };
        for (i, l) in self.layers.iter().enumerate() {
            let s = get(&shapes, res.primary[i]);
            let out = match &l.op {
                Op::Conv { param, geometry } => {
                    let (c, h, w) = complex(s, l)?;
                    let layer = params.conv(param)?;
                    if layer.in_channels() != c {
                        return Err(Error::ShapeMismatch(format!(
                            "layer '{}' gets {} channels, kernel '{}' expects {}",
                            l.name,
                            c,
                            param,
                            layer.in_channels()
                        )));
                    }
                    let (oh, ow) = geometry.out_hw(h, w, layer.kernel())?;
                    ValueShape::Complex(layer.out_channels(), oh, ow)
                }
                Op::TransConv { param } => {
                    let (c, h, w) = complex(s, l)?;
                    let layer = params.conv(param)?;
                    if layer.out_channels() != c || layer.kernel() != UPSAMPLE {
                        return Err(Error::ShapeMismatch(format!(
                            "transposed layer '{}' does not accept {} channels",
                            l.name, c
                        )));
                    }
                    ValueShape::Complex(layer.in_channels(), h * UPSAMPLE, w * UPSAMPLE)
                }
                Op::Relu => ValueShape::Complex(complex(s, l)?.0, s.dims().1, s.dims().2),
                Op::MaxPool { geometry } => {
                    let (c, h, w) = complex(s, l)?;
                    let (oh, ow) = geometry.out_hw(h, w)?;
                    ValueShape::Complex(c, oh, ow)
                }
                Op::MirrorPad { margin } => {
                    let (c, h, w) = complex(s, l)?;
                    if *margin >= h.min(w) {
                        return Err(Error::Dimension(format!(
                            "mirror margin {} too large for {}x{}",
                            margin, h, w
                        )));
                    }
                    ValueShape::Complex(c, h + 2 * margin, w + 2 * margin)
                }
                Op::CropConcat { .. } => {
                    let (c, h, w) = complex(s, l)?;
                    let (tc, th, tw) = complex(get(&shapes, res.secondary[i].unwrap()), l)?;
                    if th < h || tw < w {
                        return Err(Error::Dimension(format!(
                            "tap {}x{} smaller than {}x{} at '{}'",
                            th, tw, h, w, l.name
                        )));
                    }
                    ValueShape::Complex(tc + c, h, w)
                }
                Op::Head { param } => {
                    params.head(param)?;
                    let (c, h, w) = complex(s, l)?;
                    ValueShape::Real(c, h, w)
                }
                Op::Softmax => match s {
                    ValueShape::Real(c, h, w) => ValueShape::Real(c, h, w),
                    _ => return Err(Error::InvalidNetwork("softmax needs real scores".into())),
                },
            };
            shapes.push(out);
        }
        Ok(shapes)
    }

    /// Receptive field after each convolution or pooling layer on the primary chain from the input.
    pub fn receptive_field_chain(&self, params: &NetworkParams) -> Result<Vec<usize>> {
        let res = self.resolve()?;
        let mut chain = Vec::new();
        let (mut r, mut jump) = (1usize, 1usize);
        let mut expect = Src::Input;
        for (i, l) in self.layers.iter().enumerate() {
            if res.primary[i] != expect {
                break;
            }
            expect = Src::Layer(i);
            match &l.op {
                Op::Conv { param, geometry } => {
                    let k = params.conv(param)?.kernel();
                    r += (k - 1) * geometry.dilation * jump;
                    jump *= geometry.stride;
                    chain.push(r);
                }
                Op::MaxPool { geometry } => {
                    r += (geometry.window - 1) * geometry.dilation * jump;
                    jump *= geometry.stride;
                    chain.push(r);
                }
                _ => {}
            }
        }
        Ok(chain)
    }

    /// Names of the parameter groups referenced by the layers, in first-use order.
    pub fn param_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.layers {
            if let Some(p) = l.op.param() {
                if !out.iter().any(|o| o == p) {
                    out.push(p.to_string());
                }
            }
        }
        out
    }

    /// The same graph with a trailing softmax removed.
    pub fn without_softmax(&self) -> NetworkSpec {
        let mut s = self.clone();
        if matches!(s.layers.last().map(|l| &l.op), Some(Op::Softmax)) {
            s.layers.pop();
        }
        s
    }
}
