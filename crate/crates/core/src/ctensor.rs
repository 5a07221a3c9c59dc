//! Split-plane complex tensors and the shape primitives shared by every network.
//!
//! A [`CTensor`] keeps its real and imaginary parts in two separate contiguous
//! buffers of identical shape. Spatial tensors are laid out `[channels, height,
//! width]`, row-major; kernels are `[out, in, k, k]`.

use crate::error::{Error, Result};

/// Magnitudes below this are treated as the origin when computing a phase.
pub const EPS_PHASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl CTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    /// Builds a tensor from owned planes, rejecting length mismatches and non-finite values.
    pub fn from_planes(shape: &[usize], re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if re.len() != n || im.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} needs {} elements, got re={} im={}",
                shape,
                n,
                re.len(),
                im.len()
            )));
        }
        let t = Self {
            shape: shape.to_vec(),
            re,
            im,
        };
        t.ensure_finite("from_planes")?;
        Ok(t)
    }

    /// Real-valued tensor with a zero imaginary plane.
    pub fn from_real(shape: &[usize], re: Vec<f64>) -> Result<Self> {
        let n = re.len();
        Self::from_planes(shape, re, vec![0.0; n])
    }

    pub(crate) fn from_planes_unchecked(shape: Vec<usize>, re: Vec<f64>, im: Vec<f64>) -> Self {
        debug_assert_eq!(re.len(), shape.iter().product::<usize>());
        debug_assert_eq!(im.len(), re.len());
        Self { shape, re, im }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn re_mut(&mut self) -> &mut [f64] {
        &mut self.re
    }

    pub fn im_mut(&mut self) -> &mut [f64] {
        &mut self.im
    }

    pub fn planes_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.re, &mut self.im)
    }

    pub fn into_planes(self) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        (self.shape, self.re, self.im)
    }

    /// `(channels, height, width)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[c, h, w] => Ok((c, h, w)),
            s => Err(Error::Dimension(format!("expected [c, h, w], got {:?}", s))),
        }
    }

    pub fn channels(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn height(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn width(&self) -> usize {
        self.shape.get(2).copied().unwrap_or(1)
    }

    /// Real and imaginary slices of channel `c` in a `[c, h, w]` tensor.
    pub fn channel(&self, c: usize) -> (&[f64], &[f64]) {
        let n = self.height() * self.width();
        (&self.re[c * n..(c + 1) * n], &self.im[c * n..(c + 1) * n])
    }

    pub fn get(&self, idx: usize) -> (f64, f64) {
        (self.re[idx], self.im[idx])
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.re.iter().chain(self.im.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    /// Largest absolute difference over both planes; shapes must match.
    pub fn max_abs_diff(&self, other: &CTensor) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff on mismatched shapes");
        self.re
            .iter()
            .zip(&other.re)
            .chain(self.im.iter().zip(&other.im))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Sub-window `[y0, y0+h) x [x0, x0+w)` of every channel.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<CTensor> {
        let (c, ih, iw) = self.dims3()?;
        if y0 + h > ih || x0 + w > iw {
            return Err(Error::Dimension(format!(
                "crop {}x{} at ({}, {}) exceeds {}x{}",
                h, w, y0, x0, ih, iw
            )));
        }
        let mut re = Vec::with_capacity(c * h * w);
        let mut im = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in y0..y0 + h {
                let start = ch * ih * iw + y * iw + x0;
                re.extend_from_slice(&self.re[start..start + w]);
                im.extend_from_slice(&self.im[start..start + w]);
            }
        }
        Ok(CTensor::from_planes_unchecked(vec![c, h, w], re, im))
    }
}

/// Amplitude/phase decomposition of a complex tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarView {
    pub shape: Vec<usize>,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Real-valued `[classes, height, width]` map (scores or probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ScoreMap {
    pub fn zeros(classes: usize, height: usize, width: usize) -> Self {
        Self {
            classes,
            height,
            width,
            data: vec![0.0; classes * height * width],
        }
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn at(&self, class: usize, y: usize, x: usize) -> f64 {
        self.data[(class * self.height + y) * self.width + x]
    }

    /// Scores of all classes at one pixel.
    pub fn pixel(&self, y: usize, x: usize) -> Vec<f64> {
        (0..self.classes).map(|k| self.at(k, y, x)).collect()
    }

    /// Per-pixel argmax over classes; ties resolve to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        let n = self.plane_len();
        (0..n)
            .map(|p| {
                let mut best = 0;
                let mut best_v = self.data[p];
                for k in 1..self.classes {
                    let v = self.data[k * n + p];
                    if v > best_v {
                        best_v = v;
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<ScoreMap> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::Dimension(format!(
                "crop {}x{} at ({}, {}) exceeds {}x{}",
                h, w, y0, x0, self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.classes * h * w);
        for k in 0..self.classes {
            for y in y0..y0 + h {
                let start = (k * self.height + y) * self.width + x0;
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Ok(ScoreMap {
            classes: self.classes,
            height: h,
            width: w,
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &ScoreMap) -> f64 {
        assert_eq!(
            (self.classes, self.height, self.width),
            (other.classes, other.height, other.width)
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Reflect-101 index: `-1 -> 1`, `n -> n - 2`; folds repeatedly for far indices.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Mirror-extends each side by an arbitrary amount (reflection folds as often as needed).
pub(crate) fn mirror_extend(
    x: &CTensor,
    top: usize,
    bottom: usize,
    left: usize,
    right: usize,
) -> Result<CTensor> {
    let (c, h, w) = x.dims3()?;
    let oh = h + top + bottom;
    let ow = w + left + right;
    let cols: Vec<usize> = (0..ow)
        .map(|ox| reflect_index(ox as isize - left as isize, w))
        .collect();
    let mut re = Vec::with_capacity(c * oh * ow);
    let mut im = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let (pr, pi) = x.channel(ch);
        for oy in 0..oh {
            let sy = reflect_index(oy as isize - top as isize, h);
            let row = sy * w;
            re.extend(cols.iter().map(|&sx| pr[row + sx]));
            im.extend(cols.iter().map(|&sx| pi[row + sx]));
        }
    }
    Ok(CTensor::from_planes_unchecked(vec![c, oh, ow], re, im))
}

/// Pads every side by `margin` pixels, reflecting about the edge pixel without repeating it.
pub fn mirror_pad(x: &CTensor, margin: usize) -> Result<CTensor> {
    let (_, h, w) = x.dims3()?;
    if margin > 0 && margin >= h.min(w) {
        return Err(Error::Dimension(format!(
            "mirror margin {} must be smaller than spatial extent {}x{}",
            margin, h, w
        )));
    }
    if margin == 0 {
        return Ok(x.clone());
    }
    mirror_extend(x, margin, margin, margin, margin)
}

/// Spatially centred crop; an odd surplus is removed from the bottom/right.
pub fn crop_center(x: &CTensor, target_h: usize, target_w: usize) -> Result<CTensor> {
    let (_, h, w) = x.dims3()?;
    if target_h > h || target_w > w {
        return Err(Error::Dimension(format!(
            "cannot crop {}x{} to larger {}x{}",
            h, w, target_h, target_w
        )));
    }
    x.crop((h - target_h) / 2, (w - target_w) / 2, target_h, target_w)
}

/// Stacks `b`'s channels after `a`'s.
pub fn concat_channels(a: &CTensor, b: &CTensor) -> Result<CTensor> {
    let (ca, ha, wa) = a.dims3()?;
    let (cb, hb, wb) = b.dims3()?;
    if (ha, wa) != (hb, wb) {
        return Err(Error::Dimension(format!(
            "concat of {}x{} with {}x{}",
            ha, wa, hb, wb
        )));
    }
    let mut re = Vec::with_capacity(a.len() + b.len());
    re.extend_from_slice(a.re());
    re.extend_from_slice(b.re());
    let mut im = Vec::with_capacity(a.len() + b.len());
    im.extend_from_slice(a.im());
    im.extend_from_slice(b.im());
    Ok(CTensor::from_planes_unchecked(vec![ca + cb, ha, wa], re, im))
}

#[inline]
pub(crate) fn polar_scalar(re: f64, im: f64) -> (f64, f64) {
    let mag = re.hypot(im);
    let phase = if mag < EPS_PHASE { 0.0 } else { im.atan2(re) };
    (mag, phase)
}

/// Magnitude and phase of every element; the phase at (near-)zero is 0.
pub fn polar(x: &CTensor) -> PolarView {
    let (magnitude, phase) = x
        .re()
        .iter()
        .zip(x.im())
        .map(|(&r, &i)| polar_scalar(r, i))
        .unzip();
    PolarView {
        shape: x.shape().to_vec(),
        magnitude,
        phase,
    }
}
