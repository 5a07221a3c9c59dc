//! Central finite-difference verification of the analytic backward passes.
//!
//! Every check reduces an operation to a scalar function of a flat vector of
//! real numbers (real planes first, then imaginary planes, then parameters),
//! perturbs one coordinate at a time by `±h` and compares the difference
//! quotient with the analytic gradient.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cops::{
    cconv2d, cconv2d_backward, cmaxpool2d, cmaxpool2d_backward, crelu, crelu_backward, ctransconv2d,
    ctransconv2d_backward, riap_head, riap_head_backward, softmax, softmax_backward, softmax_probs, tconv_layer,
    CConvLayer, ConvGeometry, HeadParams, PoolGeometry,
};
use crate::ctensor::{CTensor, ScoreMap};
use crate::error::{Error, Result};
use crate::nets::{build_crpm, build_cs_cnn, Executor, NetworkParams, ParamGrads, Value};
use crate::training::losses::{focal_loss, focal_loss_grad, total_weight, weighted_ce_terms, weighted_cross_entropy};
use crate::training::pipeline::cs_batch_gradient;

pub const FD_STEP: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Tolerance of the every-parameter check on the micro patch classifier.
pub const MICRO_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_INSTANCES: usize = 20;
/// Denominator floor of the relative error, per unit of `max(1, |L|)`.
/// Central differences at `h = 1e-6` carry roughly `1e-10 |L|` of rounding
/// noise, so gradient entries below the floor are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-4;

/// Coordinates probed per instance for the network-level checks.
const NETWORK_PROBES: usize = 24;
const CRPM_TILE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckedOp {
    Conv,
    Relu,
    MaxPool,
    TransConv,
    Head,
    Softmax,
    Focal,
    WeightedCe,
    CsCnn,
    Crpm,
}

impl CheckedOp {
    pub const ALL: [CheckedOp; 10] = [
        CheckedOp::Conv,
        CheckedOp::Relu,
        CheckedOp::MaxPool,
        CheckedOp::TransConv,
        CheckedOp::Head,
        CheckedOp::Softmax,
        CheckedOp::Focal,
        CheckedOp::WeightedCe,
        CheckedOp::CsCnn,
        CheckedOp::Crpm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckedOp::Conv => "cconv2d",
            CheckedOp::Relu => "crelu",
            CheckedOp::MaxPool => "cmaxpool2d",
            CheckedOp::TransConv => "ctransconv2d",
            CheckedOp::Head => "riap_head",
            CheckedOp::Softmax => "softmax",
            CheckedOp::Focal => "focal_loss",
            CheckedOp::WeightedCe => "weighted_ce",
            CheckedOp::CsCnn => "cs_cnn",
            CheckedOp::Crpm => "crpm",
        }
    }
}

impl fmt::Display for CheckedOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckedOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckedOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown operation '{}'", s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub tolerance: f64,
    pub instances: usize,
    /// Fault injection: the analytic gradient of this op is deliberately skewed.
    pub corrupt: Option<CheckedOp>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tolerance: DEFAULT_TOLERANCE,
            instances: DEFAULT_INSTANCES,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpCheck {
    pub op: CheckedOp,
    pub instances: usize,
    /// Number of coordinates compared over all instances.
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub ops: Vec<OpCheck>,
}

impl GradcheckReport {
    pub fn all_passed(&self) -> bool {
        self.ops.iter().all(|o| o.passed)
    }

    pub fn failed(&self) -> Vec<CheckedOp> {
        self.ops.iter().filter(|o| !o.passed).map(|o| o.op).collect()
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>9} {:>11} {:>12}  result", "op", "instances", "coordinates", "max_rel_err")?;
        for o in &self.ops {
            writeln!(
                f,
                "{:<14} {:>9} {:>11} {:>12.3e}  {}",
                o.op.name(),
                o.instances,
                o.coordinates,
                o.max_rel_error,
                if o.passed { "pass" } else { "FAIL" }
            )?;
        }
        write!(f, "tolerance {:e}", self.tolerance)
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest relative error over the probed coordinates of `x`.
pub fn max_relative_error<F>(x: &[f64], analytic: &[f64], probes: &[usize], f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if x.len() != analytic.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates but {} gradient entries",
            x.len(),
            analytic.len()
        )));
    }
    let floor = REL_FLOOR * f(x)?.abs().max(1.0);
    let mut buf = x.to_vec();
    let mut worst = 0.0f64;
    for &i in probes {
        buf[i] = x[i] + FD_STEP;
        let up = f(&buf)?;
        buf[i] = x[i] - FD_STEP;
        let down = f(&buf)?;
        buf[i] = x[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let e = relative_error(analytic[i], numeric, floor);
        if e.is_nan() {
            return Err(Error::NonFinite("gradcheck"));
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

fn flatten(ts: &[&CTensor]) -> Vec<f64> {
    let mut v = Vec::with_capacity(ts.iter().map(|t| 2 * t.len()).sum());
    for t in ts {
        v.extend_from_slice(t.re());
        v.extend_from_slice(t.im());
    }
    v
}

fn unflatten(v: &[f64], shapes: &[&[usize]]) -> Vec<CTensor> {
    let mut off = 0;
    shapes
        .iter()
        .map(|s| {
            let n: usize = s.iter().product();
            let re = v[off..off + n].to_vec();
            let im = v[off + n..off + 2 * n].to_vec();
            off += 2 * n;
            CTensor::from_planes_unchecked(s.to_vec(), re, im)
        })
        .collect()
}

/// `Re<g, y>` under the Euclidean pairing of the split planes.
fn pair(g: &CTensor, y: &CTensor) -> f64 {
    g.re().iter().zip(y.re()).map(|(a, b)| a * b).sum::<f64>()
        + g.im().iter().zip(y.im()).map(|(a, b)| a * b).sum::<f64>()
}

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> CTensor {
    let n: usize = shape.iter().product();
    let re = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let im = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    CTensor::from_planes_unchecked(shape.to_vec(), re, im)
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn skew(g: &mut [f64]) {
    for v in g.iter_mut() {
        *v = 1.05 * *v + 1e-2;
    }
}

/// One random instance: the point, its analytic gradient, the coordinates to
/// probe and the scalar function.
struct Instance {
    x: Vec<f64>,
    grad: Vec<f64>,
    probes: Vec<usize>,
    f: Box<dyn Fn(&[f64]) -> Result<f64>>,
}

impl Instance {
    fn new(x: Vec<f64>, grad: Vec<f64>, f: impl Fn(&[f64]) -> Result<f64> + 'static) -> Self {
        let probes = all(x.len());
        Self {
            x,
            grad,
            probes,
            f: Box::new(f),
        }
    }
}

fn conv_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let c_in = rng.gen_range(1..=3);
    let c_out = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    let g = match rng.gen_range(0..3) {
        0 => ConvGeometry::VALID,
        1 => ConvGeometry::dilated(rng.gen_range(1..=2), rng.gen_range(0..=2)),
        _ => ConvGeometry::strided(2),
    };
    let (h, w) = (rng.gen_range(5..=8), rng.gen_range(5..=8));
    let x = uniform_tensor(rng, &[c_in, h, w]);
    let layer = CConvLayer::new(uniform_tensor(rng, &[c_out, c_in, k, k]), uniform_tensor(rng, &[c_out]))?;
    let y = cconv2d(&x, &layer, g)?;
    let gy = uniform_tensor(rng, y.shape());
    let b = cconv2d_backward(&gy, &x, &layer, g)?;
    let point = flatten(&[&x, &layer.weights, &layer.bias]);
    let grad = flatten(&[&b.grad_input, &b.grad_weights, &b.grad_bias]);
    let shapes = [x.shape().to_vec(), layer.weights.shape().to_vec(), vec![c_out]];
    Ok(Instance::new(point, grad, move |v| {
        let s: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
        let t = unflatten(v, &s);
        let layer = CConvLayer {
            weights: t[1].clone(),
            bias: t[2].clone(),
        };
        Ok(pair(&gy, &cconv2d(&t[0], &layer, g)?))
    }))
}

fn relu_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let shape = [2, 4, 4];
    let mut x = uniform_tensor(rng, &shape);
    // keep every coordinate away from the kink
    let (re, im) = x.planes_mut();
    for v in re.iter_mut().chain(im.iter_mut()) {
        if v.abs() < 1e-3 {
            *v = 0.5;
        }
    }
    let gy = uniform_tensor(rng, &shape);
    let gx = crelu_backward(&gy, &x)?;
    Ok(Instance::new(flatten(&[&x]), flatten(&[&gx]), move |v| {
        let t = unflatten(v, &[&shape]);
        Ok(pair(&gy, &crelu(&t[0])))
    }))
}

fn pool_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let g = match rng.gen_range(0..5) {
        0 => PoolGeometry::downsample(2),
        1 => PoolGeometry::dense(3, 1),
        2 => PoolGeometry::dense(2, 1),
        3 => PoolGeometry::dense(2, 2),
        _ => PoolGeometry::dense_leading(2, 1),
    };
    let shape = [2, 6, 6];
    let x = uniform_tensor(rng, &shape);
    let rec = cmaxpool2d(&x, g)?;
    let gy = uniform_tensor(rng, rec.output.shape());
    let gx = cmaxpool2d_backward(&gy, &rec)?;
    Ok(Instance::new(flatten(&[&x]), flatten(&[&gx]), move |v| {
        let t = unflatten(v, &[&shape]);
        Ok(pair(&gy, &cmaxpool2d(&t[0], g)?.output))
    }))
}

fn transconv_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let c_in = rng.gen_range(1..=3);
    let c_out = rng.gen_range(1..=3);
    let (h, w) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
    let x = uniform_tensor(rng, &[c_in, h, w]);
    let layer = tconv_layer(uniform_tensor(rng, &[c_in, c_out, 2, 2]), uniform_tensor(rng, &[c_out]))?;
    let y = ctransconv2d(&x, &layer)?;
    let gy = uniform_tensor(rng, y.shape());
    let b = ctransconv2d_backward(&gy, &x, &layer)?;
    let point = flatten(&[&x, &layer.weights, &layer.bias]);
    let grad = flatten(&[&b.grad_input, &b.grad_weights, &b.grad_bias]);
    let shapes = [x.shape().to_vec(), layer.weights.shape().to_vec(), vec![c_out]];
    Ok(Instance::new(point, grad, move |v| {
        let s: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
        let t = unflatten(v, &s);
        let layer = CConvLayer {
            weights: t[1].clone(),
            bias: t[2].clone(),
        };
        Ok(pair(&gy, &ctransconv2d(&t[0], &layer)?))
    }))
}

fn head_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let shape = [rng.gen_range(2..=4), 3, 3];
    let mut z = uniform_tensor(rng, &shape);
    // stay off the origin and off the branch cut of the phase
    {
        let (re, im) = z.planes_mut();
        for (r, i) in re.iter_mut().zip(im.iter_mut()) {
            while r.hypot(*i) <= 0.1 || (*r < 0.0 && i.abs() < 1e-3) {
                *r = rng.gen_range(-1.0..1.0);
                *i = rng.gen_range(-1.0..1.0);
            }
        }
    }
    let mut hp = [0.0; 5];
    hp.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    let head = HeadParams::from_array(hp);
    let s = riap_head(&z, &head)?;
    let gs: Vec<f64> = (0..s.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gmap = ScoreMap {
        data: gs.clone(),
        ..s.clone()
    };
    let (gz, gh) = riap_head_backward(&gmap, &z, &head)?;
    let mut point = flatten(&[&z]);
    point.extend_from_slice(&hp);
    let mut grad = flatten(&[&gz]);
    grad.extend_from_slice(&gh.to_array());
    let n = 2 * z.len();
    Ok(Instance::new(point, grad, move |v| {
        let t = unflatten(&v[..n], &[&shape]);
        let head = HeadParams::from_array([v[n], v[n + 1], v[n + 2], v[n + 3], v[n + 4]]);
        let s = riap_head(&t[0], &head)?;
        Ok(s.data.iter().zip(&gs).map(|(a, b)| a * b).sum())
    }))
}

fn random_scores(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

fn softmax_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let k = rng.gen_range(2..=5);
    let s = random_scores(rng, k);
    let gp = random_scores(rng, k);
    let grad = softmax_backward(&softmax(&s), &gp);
    Ok(Instance::new(s, grad, move |v| {
        Ok(softmax(v).iter().zip(&gp).map(|(a, b)| a * b).sum())
    }))
}

fn focal_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let k = rng.gen_range(2..=5);
    let s = random_scores(rng, k);
    let label = rng.gen_range(0..k);
    let alpha = rng.gen_range(0.1..1.0);
    let gamma = match rng.gen_range(0..3) {
        0 => 0.0,
        1 => 2.0,
        _ => rng.gen_range(0.5..4.0),
    };
    let p = softmax(&s);
    let (_, gp) = focal_loss_grad(&p, label, alpha, gamma)?;
    let grad = softmax_backward(&p, &gp);
    Ok(Instance::new(s, grad, move |v| focal_loss(&softmax(v), label, alpha, gamma)))
}

fn wce_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let (k, h, w) = (rng.gen_range(2..=4), 3, 3);
    let n = h * w;
    let scores = ScoreMap {
        classes: k,
        height: h,
        width: w,
        data: random_scores(rng, k * n),
    };
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let weights: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.1..2.0) })
        .collect();
    let weights = if weights.iter().all(|&v| v == 0.0) { vec![1.0; n] } else { weights };
    let probs = softmax_probs(&scores);
    let (_, gp) = weighted_ce_terms(&probs, &labels, &weights)?;
    let total = total_weight(&weights)?;
    let mut grad = vec![0.0; k * n];
    for px in 0..n {
        let p: Vec<f64> = (0..k).map(|c| probs.data[c * n + px]).collect();
        let g: Vec<f64> = (0..k).map(|c| gp.data[c * n + px] / total).collect();
        for (c, v) in softmax_backward(&p, &g).into_iter().enumerate() {
            grad[c * n + px] = v;
        }
    }
    let template = scores.clone();
    Ok(Instance::new(scores.data, grad, move |v| {
        let s = ScoreMap {
            data: v.to_vec(),
            ..template.clone()
        };
        weighted_cross_entropy(&softmax_probs(&s), &labels, &weights)
    }))
}

/// Flat view over the trainable groups of a parameter set, in map order.
#[derive(Clone)]
struct ParamLayout {
    convs: Vec<String>,
    heads: Vec<String>,
}

impl ParamLayout {
    fn trainable(params: &NetworkParams) -> Self {
        Self {
            convs: params.convs.keys().filter(|n| params.is_trainable(n)).cloned().collect(),
            heads: params.heads.keys().filter(|n| params.is_trainable(n)).cloned().collect(),
        }
    }

    fn flatten(&self, params: &NetworkParams) -> Result<Vec<f64>> {
        let mut v = Vec::new();
        for n in &self.convs {
            let l = params.conv(n)?;
            v.extend(flatten(&[&l.weights, &l.bias]));
        }
        for n in &self.heads {
            v.extend(params.head(n)?.to_array());
        }
        Ok(v)
    }

    fn flatten_grads(&self, g: &ParamGrads) -> Result<Vec<f64>> {
        let mut v = Vec::new();
        for n in &self.convs {
            let (w, b) = g
                .convs
                .get(n)
                .ok_or_else(|| Error::InvalidNetwork(format!("no gradient for '{}'", n)))?;
            v.extend(flatten(&[w, b]));
        }
        for n in &self.heads {
            let h = g
                .heads
                .get(n)
                .ok_or_else(|| Error::InvalidNetwork(format!("no gradient for '{}'", n)))?;
            v.extend_from_slice(h);
        }
        Ok(v)
    }

    fn apply(&self, v: &[f64], params: &mut NetworkParams) -> Result<()> {
        let mut off = 0;
        for n in &self.convs {
            let l = params.conv(n)?;
            let shapes = [l.weights.shape().to_vec(), l.bias.shape().to_vec()];
            let len = 2 * (l.weights.len() + l.bias.len());
            let s: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
            let mut t = unflatten(&v[off..off + len], &s).into_iter();
            let layer = params.convs.get_mut(n).expect("group checked above");
            layer.weights = t.next().expect("two tensors");
            layer.bias = t.next().expect("two tensors");
            off += len;
        }
        for n in &self.heads {
            let h = HeadParams::from_array([v[off], v[off + 1], v[off + 2], v[off + 3], v[off + 4]]);
            params.heads.insert(n.clone(), h);
            off += 5;
        }
        Ok(())
    }
}

/// Batch focal loss of the patch classifier as a function of all its parameters.
fn cs_cnn_problem(
    rng: &mut ChaCha8Rng,
    c_in: usize,
    classes: usize,
    batch: usize,
) -> Result<(Vec<f64>, Vec<f64>, Box<dyn Fn(&[f64]) -> Result<f64>>)> {
    let (spec, params) = build_cs_cnn(c_in, classes, rng.gen())?;
    let windows: Vec<CTensor> = (0..batch).map(|_| uniform_tensor(rng, &[c_in, 10, 10])).collect();
    let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
    let (alpha, gamma) = (0.25, 2.0);
    let refs: Vec<&CTensor> = windows.iter().collect();
    let (_, grads) = cs_batch_gradient(&spec, &params, &refs, &labels, alpha, gamma)?;
    let layout = ParamLayout::trainable(&params);
    let point = layout.flatten(&params)?;
    let grad = layout.flatten_grads(&grads)?;
    let f = move |v: &[f64]| {
        let mut p = params.clone();
        layout.apply(v, &mut p)?;
        let refs: Vec<&CTensor> = windows.iter().collect();
        Ok(cs_batch_gradient(&spec, &p, &refs, &labels, alpha, gamma)?.0)
    };
    Ok((point, grad, Box::new(f)))
}

fn cs_cnn_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let (point, grad, f) = cs_cnn_problem(rng, 2, 3, 2)?;
    let probes = sample(rng, point.len(), NETWORK_PROBES).into_vec();
    Ok(Instance {
        x: point,
        grad,
        probes,
        f,
    })
}

/// Linear functional of the fusion network's probabilities as a function of
/// its trainable groups, on a small tile.
fn crpm_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let (c_in, classes) = (2, 3);
    let (cs_spec, cs_params) = build_cs_cnn(c_in, classes, rng.gen())?;
    let (spec, params) = build_crpm(&cs_spec, &cs_params, rng.gen())?;
    let tile = uniform_tensor(rng, &[c_in, CRPM_TILE, CRPM_TILE]);
    let exec = Executor::new(&spec, &params)?;
    let trace = exec.forward(&tile, None)?;
    let out = trace.output().real()?.clone();
    let gp: Vec<f64> = (0..out.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grads = exec.backward(
        &trace,
        Value::Real(ScoreMap {
            data: gp.clone(),
            ..out
        }),
    )?;
    let layout = ParamLayout::trainable(&params);
    let point = layout.flatten(&params)?;
    let grad = layout.flatten_grads(&grads)?;
    let probes = sample(rng, point.len(), NETWORK_PROBES).into_vec();
    let f = move |v: &[f64]| {
        let mut p = params.clone();
        layout.apply(v, &mut p)?;
        let exec = Executor::new(&spec, &p)?;
        let (out, _) = exec.infer(&tile, &[])?;
        Ok(out.real()?.data.iter().zip(&gp).map(|(a, b)| a * b).sum())
    };
    Ok(Instance {
        x: point,
        grad,
        probes,
        f: Box::new(f),
    })
}

fn make_instance(op: CheckedOp, rng: &mut ChaCha8Rng) -> Result<Instance> {
    match op {
        CheckedOp::Conv => conv_instance(rng),
        CheckedOp::Relu => relu_instance(rng),
        CheckedOp::MaxPool => pool_instance(rng),
        CheckedOp::TransConv => transconv_instance(rng),
        CheckedOp::Head => head_instance(rng),
        CheckedOp::Softmax => softmax_instance(rng),
        CheckedOp::Focal => focal_instance(rng),
        CheckedOp::WeightedCe => wce_instance(rng),
        CheckedOp::CsCnn => cs_cnn_instance(rng),
        CheckedOp::Crpm => crpm_instance(rng),
    }
}

/// Runs `cfg.instances` seeded instances of one operation.
pub fn check_op(op: CheckedOp, cfg: &GradcheckConfig) -> Result<OpCheck> {
    if cfg.instances == 0 {
        return Err(Error::InvalidArgument("gradient check needs at least one instance".into()));
    }
    let stream = CheckedOp::ALL.iter().position(|&o| o == op).unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut worst = 0.0f64;
    let mut coordinates = 0;
    for _ in 0..cfg.instances {
        let mut inst = make_instance(op, &mut rng)?;
        if cfg.corrupt == Some(op) {
            skew(&mut inst.grad);
        }
        worst = worst.max(max_relative_error(&inst.x, &inst.grad, &inst.probes, &inst.f)?);
        coordinates += inst.probes.len();
    }
    Ok(OpCheck {
        op,
        instances: cfg.instances,
        coordinates,
        max_rel_error: worst,
        passed: worst < cfg.tolerance,
    })
}

/// The full suite, one row per operation.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let ops = CheckedOp::ALL
        .iter()
        .map(|&op| check_op(op, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradcheckReport {
        tolerance: cfg.tolerance,
        ops,
    })
}

/// Every parameter of a two-class patch classifier trained on a batch of two
/// pixels, against finite differences of the batch loss.
pub fn micro_cs_cnn_check(seed: u64, c_in: usize) -> Result<OpCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (point, grad, f) = cs_cnn_problem(&mut rng, c_in, 2, 2)?;
    let probes = all(point.len());
    let worst = max_relative_error(&point, &grad, &probes, f)?;
    Ok(OpCheck {
        op: CheckedOp::CsCnn,
        instances: 1,
        coordinates: probes.len(),
        max_rel_error: worst,
        passed: worst < MICRO_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0, REL_FLOOR), 0.0);
        assert!((relative_error(2.0, 1.0, REL_FLOOR) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9, REL_FLOOR) - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_of_a_quadratic() {
        let x = vec![0.3, -1.2, 2.0];
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let e = max_relative_error(&x, &grad, &[0, 1, 2], |v| Ok(v.iter().map(|a| a * a).sum())).unwrap();
        assert!(e < 1e-8);
        let wrong: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let e = max_relative_error(&x, &wrong, &[0, 1, 2], |v| Ok(v.iter().map(|a| a * a).sum())).unwrap();
        assert!(e > 0.3);
    }

    #[test]
    fn op_names_round_trip() {
        for op in CheckedOp::ALL {
            assert_eq!(op.name().parse::<CheckedOp>().unwrap(), op);
        }
        assert!("nope".parse::<CheckedOp>().is_err());
    }

    #[test]
    fn every_op_passes_at_default_tolerance() {
        let report = run_gradcheck(&GradcheckConfig::default()).unwrap();
        println!("{}", report);
        assert!(report.all_passed(), "{}", report);
        assert_eq!(report.ops.len(), CheckedOp::ALL.len());
        assert!(report.ops.iter().all(|o| o.instances >= 20));
    }

    #[test]
    fn corruption_fails_only_that_op() {
        let cfg = GradcheckConfig {
            instances: 3,
            corrupt: Some(CheckedOp::MaxPool),
            ..Default::default()
        };
        let report = run_gradcheck(&cfg).unwrap();
        assert_eq!(report.failed(), vec![CheckedOp::MaxPool], "{}", report);
    }

    #[test]
    fn vanishing_tolerance_fails_everything() {
        let cfg = GradcheckConfig {
            instances: 2,
            tolerance: 1e-300,
            ..Default::default()
        };
        let report = run_gradcheck(&cfg).unwrap();
        assert_eq!(report.failed().len(), CheckedOp::ALL.len(), "{}", report);
    }

    #[test]
    fn micro_instance_every_parameter() {
        let r = micro_cs_cnn_check(7, 6).unwrap();
        assert!(r.coordinates > 9000);
        assert!(r.passed, "max relative error {:e}", r.max_rel_error);
    }
}
