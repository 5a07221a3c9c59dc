use serde_json::{Map, Value};

use super::{CovarianceScene, C11, C12, C13, C22, C23, C33};
use crate::ctensor::CTensor;
use crate::error::{Error, Result};

/// Imaginary part given to the (real) diagonal entries in complex mode.
pub const DIAGONAL_IMAG: f64 = 1e-8;
/// Added to every standard deviation so constant channels stay finite.
pub const EPS_Z: f64 = 1e-12;

pub const COMPLEX_FEATURE_NAMES: [&str; 6] = ["C11", "C22", "C33", "C12", "C13", "C23"];
pub const REAL_FEATURE_NAMES: [&str; 9] = [
    "C11", "Re_C12", "Im_C12", "C22", "Re_C13", "Im_C13", "C33", "Re_C23", "Im_C23",
];

/// `[6, h, w]` complex features ordered C11, C22, C33, C12, C13, C23.
pub fn features_complex(scene: &CovarianceScene) -> CTensor {
    let n = scene.height() * scene.width();
    let mut re = Vec::with_capacity(6 * n);
    let mut im = Vec::with_capacity(6 * n);
    for (k, p) in [C11, C22, C33, C12, C13, C23].into_iter().enumerate() {
        let (pr, pi) = scene.planes.channel(p);
        re.extend_from_slice(pr);
        if k < 3 {
            im.extend(std::iter::repeat(DIAGONAL_IMAG).take(n));
        } else {
            im.extend_from_slice(pi);
        }
    }
    CTensor::from_planes_unchecked(vec![6, scene.height(), scene.width()], re, im)
}

/// Real `[channels, h, w]` feature stack.
#[derive(Debug, Clone, PartialEq)]
pub struct RealFeatures {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl RealFeatures {
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Nine real features in the order of [`REAL_FEATURE_NAMES`].
pub fn features_real(scene: &CovarianceScene) -> RealFeatures {
    let n = scene.height() * scene.width();
    let mut data = Vec::with_capacity(9 * n);
    let re = |p: usize| scene.planes.channel(p).0;
    let im = |p: usize| scene.planes.channel(p).1;
    for part in [re(C11), re(C12), im(C12), re(C22), re(C13), im(C13), re(C33), re(C23), im(C23)] {
        data.extend_from_slice(part);
    }
    RealFeatures {
        channels: 9,
        height: scene.height(),
        width: scene.width(),
        data,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mu_re: f64,
    pub mu_im: f64,
    pub sigma: f64,
}

/// Per-channel normalisation statistics, kept so inference reapplies the training transform.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub channels: Vec<(String, ChannelStats)>,
}

fn channel_stats(re: &[f64], im: &[f64]) -> ChannelStats {
    let n = re.len() as f64;
    let mu_re = re.iter().sum::<f64>() / n;
    let mu_im = im.iter().sum::<f64>() / n;
    let var = re
        .iter()
        .zip(im)
        .map(|(r, i)| (r - mu_re).powi(2) + (i - mu_im).powi(2))
        .sum::<f64>()
        / n;
    ChannelStats {
        mu_re,
        mu_im,
        sigma: var.sqrt() + EPS_Z,
    }
}

impl NormStats {
    /// Fits complex statistics: mean `mu`, shared scale `sqrt(mean |x - mu|^2) + EPS_Z`.
    pub fn fit(x: &CTensor, names: &[&str]) -> Result<Self> {
        let (c, h, w) = x.dims3()?;
        if h * w == 0 {
            return Err(Error::Dimension("cannot normalise an empty scene".into()));
        }
        let names = channel_names(names, c);
        Ok(Self {
            channels: (0..c)
                .map(|ch| {
                    let (r, i) = x.channel(ch);
                    (names[ch].clone(), channel_stats(r, i))
                })
                .collect(),
        })
    }

    pub fn apply(&self, x: &CTensor) -> Result<CTensor> {
        let (c, h, w) = x.dims3()?;
        if c != self.channels.len() {
            return Err(Error::ShapeMismatch(format!(
                "normalisation stats cover {} channels, features have {}",
                self.channels.len(),
                c
            )));
        }
        let n = h * w;
        let mut out = x.clone();
        let (re, im) = out.planes_mut();
        for (ch, (_, s)) in self.channels.iter().enumerate() {
            for i in ch * n..(ch + 1) * n {
                re[i] = (re[i] - s.mu_re) / s.sigma;
                im[i] = (im[i] - s.mu_im) / s.sigma;
            }
        }
        Ok(out)
    }

    pub fn apply_real(&self, x: &RealFeatures) -> Result<RealFeatures> {
        if x.channels != self.channels.len() {
            return Err(Error::ShapeMismatch("normalisation stats channel count".into()));
        }
        let n = x.height * x.width;
        let mut out = x.clone();
        for (ch, (_, s)) in self.channels.iter().enumerate() {
            for v in &mut out.data[ch * n..(ch + 1) * n] {
                *v = (*v - s.mu_re) / s.sigma;
            }
        }
        Ok(out)
    }

    /// `{channel: {mu_re, mu_im, sigma}}` in channel order.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (name, s) in &self.channels {
            let mut e = Map::new();
            e.insert("mu_re".into(), s.mu_re.into());
            e.insert("mu_im".into(), s.mu_im.into());
            e.insert("sigma".into(), s.sigma.into());
            m.insert(name.clone(), Value::Object(e));
        }
        Value::Object(m)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Format("normalisation stats must be a JSON object".into()))?;
        let field = |e: &Value, k: &str| -> Result<f64> {
            e.get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Format(format!("normalisation stats missing numeric '{}'", k)))
        };
        let mut channels = Vec::with_capacity(obj.len());
        for (name, e) in obj {
            let s = ChannelStats {
                mu_re: field(e, "mu_re")?,
                mu_im: field(e, "mu_im")?,
                sigma: field(e, "sigma")?,
            };
            if !(s.sigma > 0.0 && s.sigma.is_finite() && s.mu_re.is_finite() && s.mu_im.is_finite()) {
                return Err(Error::Format(format!("invalid normalisation stats for '{}'", name)));
            }
            channels.push((name.clone(), s));
        }
        Ok(Self { channels })
    }
}

fn channel_names(names: &[&str], c: usize) -> Vec<String> {
    if names.len() == c {
        names.iter().map(|s| s.to_string()).collect()
    } else {
        (0..c).map(|i| i.to_string()).collect()
    }
}

/// Z-scores each complex channel; see [`NormStats::fit`].
pub fn zscore_normalize(x: &CTensor) -> Result<(CTensor, NormStats)> {
    let names: &[&str] = if x.channels() == 6 { &COMPLEX_FEATURE_NAMES } else { &[] };
    let stats = NormStats::fit(x, names)?;
    Ok((stats.apply(x)?, stats))
}

/// Ordinary mean / population standard deviation per real channel.
pub fn zscore_normalize_real(x: &RealFeatures) -> Result<(RealFeatures, NormStats)> {
    let n = x.height * x.width;
    if n == 0 {
        return Err(Error::Dimension("cannot normalise an empty scene".into()));
    }
    let names = channel_names(if x.channels == 9 { &REAL_FEATURE_NAMES } else { &[] }, x.channels);
    let zeros = vec![0.0; n];
    let stats = NormStats {
        channels: (0..x.channels)
            .map(|c| (names[c].clone(), channel_stats(x.channel(c), &zeros)))
            .collect(),
    };
    Ok((stats.apply_real(x)?, stats))
}
