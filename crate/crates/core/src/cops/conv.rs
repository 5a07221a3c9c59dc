//! Complex cross-convolution.
//!
//! The complex product of input and kernel is realised as four real
//! convolutions, `Re = Conv(Xr, Wr) - Conv(Xi, Wi)` and
//! `Im = Conv(Xr, Wi) + Conv(Xi, Wr)`. The reference route gathers every
//! receptive window into a column and takes an inner product; the production
//! route accumulates whole output rows. Both add the taps of an output element
//! in the same `(channel, ky, kx)` order, so they agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::ctensor::CTensor;
use crate::error::{Error, Result};

/// Per-side zero padding in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub const NONE: Padding = Padding {
        top: 0,
        bottom: 0,
        left: 0,
        right: 0,
    };

    pub fn symmetric(p: usize) -> Self {
        Self {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub stride: usize,
    pub dilation: usize,
    pub padding: Padding,
}

impl ConvGeometry {
    pub const VALID: ConvGeometry = ConvGeometry {
        stride: 1,
        dilation: 1,
        padding: Padding::NONE,
    };

    pub fn dilated(dilation: usize, pad: usize) -> Self {
        Self {
            stride: 1,
            dilation,
            padding: Padding::symmetric(pad),
        }
    }

    pub fn strided(stride: usize) -> Self {
        Self {
            stride,
            dilation: 1,
            padding: Padding::NONE,
        }
    }

    /// Output extent along one axis, or `None` if the dilated kernel does not fit.
    pub fn out_extent(&self, extent: usize, pad_lo: usize, pad_hi: usize, k: usize) -> Option<usize> {
        let span = self.dilation * (k - 1) + 1;
        let padded = extent + pad_lo + pad_hi;
        if self.stride == 0 || padded < span {
            None
        } else {
            Some((padded - span) / self.stride + 1)
        }
    }

    pub fn out_hw(&self, h: usize, w: usize, k: usize) -> Result<(usize, usize)> {
        let p = self.padding;
        match (
            self.out_extent(h, p.top, p.bottom, k),
            self.out_extent(w, p.left, p.right, k),
        ) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
            _ => Err(Error::Dimension(format!(
                "kernel {}x{} (dilation {}, padding {:?}) does not fit a {}x{} input",
                k, k, self.dilation, p, h, w
            ))),
        }
    }
}

/// Complex kernel `W = Wr + jWi` of shape `[out, in, k, k]` and complex bias `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CConvLayer {
    pub weights: CTensor,
    pub bias: CTensor,
}

impl CConvLayer {
    pub fn new(weights: CTensor, bias: CTensor) -> Result<Self> {
        let s = weights.shape();
        if s.len() != 4 || s[2] != s[3] || s[2] == 0 {
            return Err(Error::ShapeMismatch(format!(
                "kernel must be [out, in, k, k], got {:?}",
                s
            )));
        }
        if bias.shape() != [s[0]] {
            return Err(Error::ShapeMismatch(format!(
                "bias {:?} does not match {} output channels",
                bias.shape(),
                s[0]
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Self {
        Self {
            weights: CTensor::zeros(&[out_channels, in_channels, k, k]),
            bias: CTensor::zeros(&[out_channels]),
        }
    }

    /// First dimension of the kernel tensor.
    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    /// Real degrees of freedom: `2 k^2 c_in c_out + 2 c_out`.
    pub fn param_count(&self) -> usize {
        2 * self.weights.len() + 2 * self.bias.len()
    }
}

/// Gradients of a layer with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub grad_input: CTensor,
    pub grad_weights: CTensor,
    pub grad_bias: CTensor,
}

struct Plan {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    oh: usize,
    ow: usize,
    g: ConvGeometry,
}

impl Plan {
    fn new(x: &CTensor, layer: &CConvLayer, g: ConvGeometry) -> Result<Self> {
        let (c_in, h, w) = x.dims3()?;
        if c_in != layer.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} channels, kernel expects {}",
                c_in,
                layer.in_channels()
            )));
        }
        if g.stride == 0 || g.dilation == 0 {
            return Err(Error::InvalidArgument("stride and dilation must be >= 1".into()));
        }
        let k = layer.kernel();
        let (oh, ow) = g.out_hw(h, w, k)?;
        Ok(Self {
            c_in,
            h,
            w,
            c_out: layer.out_channels(),
            k,
            oh,
            ow,
            g,
        })
    }

    /// Input row touched by output row `oy` at kernel row `ky`, if inside the image.
    #[inline]
    fn in_row(&self, oy: usize, ky: usize) -> Option<usize> {
        let y = (oy * self.g.stride + ky * self.g.dilation) as isize - self.g.padding.top as isize;
        (y >= 0 && (y as usize) < self.h).then_some(y as usize)
    }

    /// Output columns `[lo, hi)` whose tap `kx` lands inside the image, and the
    /// signed input offset of column 0.
    #[inline]
    fn col_range(&self, kx: usize) -> (usize, usize, isize) {
        let s = self.g.stride as isize;
        let off = (kx * self.g.dilation) as isize - self.g.padding.left as isize;
        // smallest ox with ox*s + off >= 0
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        // largest ox with ox*s + off <= w-1
        let last = self.w as isize - 1 - off;
        let hi = if last < 0 { 0 } else { (last / s + 1).min(self.ow as isize) };
        let lo = lo.min(hi);
        (lo as usize, hi as usize, off)
    }
}

/// Complex cross-convolution `y = W * x + b`.
pub fn cconv2d(x: &CTensor, layer: &CConvLayer, g: ConvGeometry) -> Result<CTensor> {
    let p = Plan::new(x, layer, g)?;
    let (oh, ow, k) = (p.oh, p.ow, p.k);
    let plane_in = p.h * p.w;
    let mut out_re = vec![0.0; p.c_out * oh * ow];
    let mut out_im = vec![0.0; p.c_out * oh * ow];
    let (xr, xi) = (x.re(), x.im());
    let (wr_all, wi_all) = (layer.weights.re(), layer.weights.im());
    let (br, bi) = (layer.bias.re(), layer.bias.im());
    let cols: Vec<(usize, usize, isize)> = (0..k).map(|kx| p.col_range(kx)).collect();

    let mut rr = vec![0.0; ow];
    let mut ii = vec![0.0; ow];
    let mut ri = vec![0.0; ow];
    let mut ir = vec![0.0; ow];
    for oy in 0..oh {
        for o in 0..p.c_out {
            rr.fill(0.0);
            ii.fill(0.0);
            ri.fill(0.0);
            ir.fill(0.0);
            for c in 0..p.c_in {
                let wbase = (o * p.c_in + c) * k * k;
                for ky in 0..k {
                    let Some(iy) = p.in_row(oy, ky) else { continue };
                    let row = c * plane_in + iy * p.w;
                    for (kx, &(lo, hi, off)) in cols.iter().enumerate() {
                        if lo >= hi {
                            continue;
                        }
                        let wr = wr_all[wbase + ky * k + kx];
                        let wi = wi_all[wbase + ky * k + kx];
                        if p.g.stride == 1 {
                            let start = (row as isize + lo as isize + off) as usize;
                            let n = hi - lo;
                            let sr = &xr[start..start + n];
                            let si = &xi[start..start + n];
                            let a = &mut rr[lo..hi];
                            let b = &mut ii[lo..hi];
                            let cc = &mut ri[lo..hi];
                            let d = &mut ir[lo..hi];
                            for j in 0..n {
                                let vr = sr[j];
                                let vi = si[j];
                                a[j] += wr * vr;
                                b[j] += wi * vi;
                                cc[j] += wi * vr;
                                d[j] += wr * vi;
                            }
                        } else {
                            let s = p.g.stride;
                            for ox in lo..hi {
                                let idx = (row as isize + (ox * s) as isize + off) as usize;
                                let vr = xr[idx];
                                let vi = xi[idx];
                                rr[ox] += wr * vr;
                                ii[ox] += wi * vi;
                                ri[ox] += wi * vr;
                                ir[ox] += wr * vi;
                            }
                        }
                    }
                }
            }
            let base = (o * oh + oy) * ow;
            for ox in 0..ow {
                out_re[base + ox] = rr[ox] - ii[ox] + br[o];
                out_im[base + ox] = ri[ox] + ir[ox] + bi[o];
            }
        }
    }
    let out = CTensor::from_planes_unchecked(vec![p.c_out, oh, ow], out_re, out_im);
    out.ensure_finite("cconv2d")?;
    Ok(out)
}

/// Real convolution of one real input group with one real kernel group, by
/// explicit window gathering. `x` is `[c, h, w]`, `kernel` is `[o, c, k, k]`.
pub fn real_conv2d_gather(
    x: &[f64],
    dims: (usize, usize, usize),
    kernel: &[f64],
    kdims: (usize, usize),
    g: ConvGeometry,
) -> Result<(Vec<f64>, usize, usize)> {
    let (c, h, w) = dims;
    let (o, k) = kdims;
    let (oh, ow) = g.out_hw(h, w, k)?;
    let mut column = vec![0.0; c * k * k];
    let mut out = vec![0.0; o * oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                for ky in 0..k {
                    for kx in 0..k {
                        let y = (oy * g.stride + ky * g.dilation) as isize - g.padding.top as isize;
                        let xx = (ox * g.stride + kx * g.dilation) as isize - g.padding.left as isize;
                        column[(ch * k + ky) * k + kx] =
                            if y >= 0 && xx >= 0 && (y as usize) < h && (xx as usize) < w {
                                x[(ch * h + y as usize) * w + xx as usize]
                            } else {
                                0.0
                            };
                    }
                }
            }
            for oc in 0..o {
                let wk = &kernel[oc * c * k * k..(oc + 1) * c * k * k];
                let mut acc = 0.0;
                for (a, b) in column.iter().zip(wk) {
                    acc += a * b;
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Ok((out, oh, ow))
}

/// The four-term decomposition evaluated through [`real_conv2d_gather`].
pub fn cconv2d_gather(x: &CTensor, layer: &CConvLayer, g: ConvGeometry) -> Result<CTensor> {
    let p = Plan::new(x, layer, g)?;
    let dims = (p.c_in, p.h, p.w);
    let kd = (p.c_out, p.k);
    let (wr, wi) = (layer.weights.re(), layer.weights.im());
    let (rr, oh, ow) = real_conv2d_gather(x.re(), dims, wr, kd, g)?;
    let (ii, _, _) = real_conv2d_gather(x.im(), dims, wi, kd, g)?;
    let (ri, _, _) = real_conv2d_gather(x.re(), dims, wi, kd, g)?;
    let (ir, _, _) = real_conv2d_gather(x.im(), dims, wr, kd, g)?;
    let n = oh * ow;
    let (br, bi) = (layer.bias.re(), layer.bias.im());
    let re = (0..rr.len()).map(|i| rr[i] - ii[i] + br[i / n]).collect();
    let im = (0..rr.len()).map(|i| ri[i] + ir[i] + bi[i / n]).collect();
    Ok(CTensor::from_planes_unchecked(vec![p.c_out, oh, ow], re, im))
}

/// Backward pass of [`cconv2d`].
///
/// With upstream gradient `g = dL/dy_r + j dL/dy_i`:
/// `dL/dw_r = sum(g_r x_r + g_i x_i)`, `dL/dw_i = sum(g_i x_r - g_r x_i)`,
/// and the input gradient is the scatter of `conj(w) g`.
pub fn cconv2d_backward(
    grad_out: &CTensor,
    x: &CTensor,
    layer: &CConvLayer,
    g: ConvGeometry,
) -> Result<GradBundle> {
    conv_backward_impl(grad_out, x, layer, g, true)
}

pub(crate) fn conv_backward_impl(
    grad_out: &CTensor,
    x: &CTensor,
    layer: &CConvLayer,
    g: ConvGeometry,
    want_input: bool,
) -> Result<GradBundle> {
    let p = Plan::new(x, layer, g)?;
    if grad_out.shape() != [p.c_out, p.oh, p.ow] {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient {:?} vs output [{}, {}, {}]",
            grad_out.shape(),
            p.c_out,
            p.oh,
            p.ow
        )));
    }
    let (k, oh, ow) = (p.k, p.oh, p.ow);
    let s = p.g.stride;
    let plane_in = p.h * p.w;
    let plane_out = oh * ow;
    let (xr, xi) = (x.re(), x.im());
    let (gr, gi) = (grad_out.re(), grad_out.im());
    let (wr_all, wi_all) = (layer.weights.re(), layer.weights.im());
    let cols: Vec<(usize, usize, isize)> = (0..k).map(|kx| p.col_range(kx)).collect();

    let mut dwr = vec![0.0; layer.weights.len()];
    let mut dwi = vec![0.0; layer.weights.len()];
    let mut dxr = vec![0.0; if want_input { x.len() } else { 0 }];
    let mut dxi = vec![0.0; if want_input { x.len() } else { 0 }];

    for o in 0..p.c_out {
        let gro = &gr[o * plane_out..(o + 1) * plane_out];
        let gio = &gi[o * plane_out..(o + 1) * plane_out];
        for c in 0..p.c_in {
            let wbase = (o * p.c_in + c) * k * k;
            for ky in 0..k {
                for (kx, &(lo, hi, off)) in cols.iter().enumerate() {
                    if lo >= hi {
                        continue;
                    }
                    let widx = wbase + ky * k + kx;
                    let (wr, wi) = (wr_all[widx], wi_all[widx]);
                    let mut acc_r = 0.0;
                    let mut acc_i = 0.0;
                    for oy in 0..oh {
                        let Some(iy) = p.in_row(oy, ky) else { continue };
                        let row = c * plane_in + iy * p.w;
                        let grow = oy * ow;
                        for ox in lo..hi {
                            let idx = (row as isize + (ox * s) as isize + off) as usize;
                            let (vr, vi) = (xr[idx], xi[idx]);
                            let (a, b) = (gro[grow + ox], gio[grow + ox]);
                            acc_r += a * vr + b * vi;
                            acc_i += b * vr - a * vi;
                            if want_input {
                                dxr[idx] += a * wr + b * wi;
                                dxi[idx] += b * wr - a * wi;
                            }
                        }
                    }
                    dwr[widx] = acc_r;
                    dwi[widx] = acc_i;
                }
            }
        }
    }
    let bias_r = (0..p.c_out)
        .map(|o| gr[o * plane_out..(o + 1) * plane_out].iter().sum())
        .collect();
    let bias_i = (0..p.c_out)
        .map(|o| gi[o * plane_out..(o + 1) * plane_out].iter().sum())
        .collect();
    let grad_input = if want_input {
        CTensor::from_planes_unchecked(x.shape().to_vec(), dxr, dxi)
    } else {
        CTensor::zeros(&[0])
    };
    Ok(GradBundle {
        grad_input,
        grad_weights: CTensor::from_planes_unchecked(layer.weights.shape().to_vec(), dwr, dwi),
        grad_bias: CTensor::from_planes_unchecked(vec![p.c_out], bias_r, bias_i),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_layer, random_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Term-by-term nested loops over the complex product, independent of both routes above.
    fn nested_loop_oracle(x: &CTensor, l: &CConvLayer, g: ConvGeometry) -> CTensor {
        let (c, h, w) = x.dims3().unwrap();
        let (o, k) = (l.out_channels(), l.kernel());
        let (oh, ow) = g.out_hw(h, w, k).unwrap();
        let mut out = CTensor::zeros(&[o, oh, ow]);
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let (mut re, mut im) = (l.bias.re()[oc], l.bias.im()[oc]);
                    for ch in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let y = (oy * g.stride + ky * g.dilation) as isize - g.padding.top as isize;
                                let xx = (ox * g.stride + kx * g.dilation) as isize - g.padding.left as isize;
                                if y < 0 || xx < 0 || y as usize >= h || xx as usize >= w {
                                    continue;
                                }
                                let xi = (ch * h + y as usize) * w + xx as usize;
                                let wi = ((oc * c + ch) * k + ky) * k + kx;
                                let (ar, ai) = x.get(xi);
                                let (br, bi) = l.weights.get(wi);
                                re += ar * br - ai * bi;
                                im += ar * bi + ai * br;
                            }
                        }
                    }
                    let idx = (oc * oh + oy) * ow + ox;
                    out.re_mut()[idx] = re;
                    out.im_mut()[idx] = im;
                }
            }
        }
        out
    }

    #[test]
    fn single_pixel_product() {
        let x = CTensor::from_planes(&[1, 1, 1], vec![1.0], vec![2.0]).unwrap();
        let w = CTensor::from_planes(&[1, 1, 1, 1], vec![3.0], vec![4.0]).unwrap();
        let l = CConvLayer::new(w, CTensor::zeros(&[1])).unwrap();
        let y = cconv2d(&x, &l, ConvGeometry::VALID).unwrap();
        assert_eq!((y.re()[0], y.im()[0]), (-5.0, 10.0));
    }

    #[test]
    fn single_pixel_gradients() {
        let x = CTensor::from_planes(&[1, 1, 1], vec![1.0], vec![2.0]).unwrap();
        let w = CTensor::from_planes(&[1, 1, 1, 1], vec![3.0], vec![4.0]).unwrap();
        let l = CConvLayer::new(w, CTensor::zeros(&[1])).unwrap();
        let g = CTensor::from_planes(&[1, 1, 1], vec![1.0], vec![0.0]).unwrap();
        let b = cconv2d_backward(&g, &x, &l, ConvGeometry::VALID).unwrap();
        // L = Re(y) = x_r w_r - x_i w_i  =>  dL/dw_r = x_r, dL/dw_i = -x_i
        assert_eq!(b.grad_weights.re()[0], 1.0);
        assert_eq!(b.grad_weights.im()[0], -2.0);
        assert_eq!(b.grad_bias.re()[0], 1.0);
        // dL/dx_r = w_r, dL/dx_i = -w_i
        assert_eq!((b.grad_input.re()[0], b.grad_input.im()[0]), (3.0, -4.0));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, &[2, 5, 5]);
        let l = random_layer(&mut rng, 3, 2, 3);
        let g = CTensor::zeros(&[3, 3, 3]);
        let b = cconv2d_backward(&g, &x, &l, ConvGeometry::VALID).unwrap();
        for t in [&b.grad_input, &b.grad_weights, &b.grad_bias] {
            assert!(t.re().iter().chain(t.im()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn real_degenerate_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = random_tensor(&mut rng, &[3, 6, 6]);
        x.im_mut().fill(0.0);
        let mut l = random_layer(&mut rng, 2, 3, 3);
        l.weights.im_mut().fill(0.0);
        l.bias.im_mut().fill(0.0);
        let y = cconv2d(&x, &l, ConvGeometry::VALID).unwrap();
        assert!(y.im().iter().all(|&v| v == 0.0));
        let (real, _, _) =
            real_conv2d_gather(x.re(), (3, 6, 6), l.weights.re(), (2, 3), ConvGeometry::VALID).unwrap();
        let expect: Vec<f64> = real
            .iter()
            .enumerate()
            .map(|(i, v)| v + l.bias.re()[i / 16])
            .collect();
        assert_eq!(y.re(), &expect[..]);
    }

    #[test]
    fn random_case_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&mut rng, &[6, 10, 10]);
        let l = random_layer(&mut rng, 4, 6, 3);
        let y = cconv2d(&x, &l, ConvGeometry::VALID).unwrap();
        assert_eq!(y.shape(), &[4, 8, 8]);
        let oracle = nested_loop_oracle(&x, &l, ConvGeometry::VALID);
        assert!(y.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn four_term_decomposition_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let geoms = [
            ConvGeometry::VALID,
            ConvGeometry::dilated(1, 1),
            ConvGeometry::dilated(2, 2),
            ConvGeometry::strided(2),
            ConvGeometry {
                stride: 2,
                dilation: 2,
                padding: Padding { top: 1, bottom: 0, left: 2, right: 1 },
            },
        ];
        for g in geoms {
            let x = random_tensor(&mut rng, &[3, 11, 9]);
            let l = random_layer(&mut rng, 5, 3, 3);
            let direct = cconv2d(&x, &l, g).unwrap();
            let gathered = cconv2d_gather(&x, &l, g).unwrap();
            assert_eq!(direct, gathered, "geometry {:?}", g);
            let oracle = nested_loop_oracle(&x, &l, g);
            assert!(direct.max_abs_diff(&oracle) < 1e-12);
        }
    }

    #[test]
    fn complex_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let x = random_tensor(&mut rng, &[3, 7, 7]);
            let mut l = random_layer(&mut rng, 4, 3, 3);
            l.bias = CTensor::zeros(&[4]);
            let theta: f64 = rand::Rng::gen_range(&mut rng, -3.14..3.14);
            let (ar, ai) = (theta.cos(), theta.sin());
            let scale = |t: &CTensor| {
                let re = t.re().iter().zip(t.im()).map(|(r, i)| ar * r - ai * i).collect();
                let im = t.re().iter().zip(t.im()).map(|(r, i)| ar * i + ai * r).collect();
                CTensor::from_planes(t.shape(), re, im).unwrap()
            };
            let lhs = cconv2d(&scale(&x), &l, ConvGeometry::dilated(1, 1)).unwrap();
            let rhs = scale(&cconv2d(&x, &l, ConvGeometry::dilated(1, 1)).unwrap());
            let norm = rhs.re().iter().chain(rhs.im()).map(|v| v.abs()).fold(0.0, f64::max);
            assert!(lhs.max_abs_diff(&rhs) / norm < 1e-10);
        }
    }

    #[test]
    fn errors() {
        let l = CConvLayer::zeros(2, 3, 3);
        assert!(matches!(
            cconv2d(&CTensor::zeros(&[2, 5, 5]), &l, ConvGeometry::VALID),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            cconv2d(&CTensor::zeros(&[3, 2, 5]), &l, ConvGeometry::VALID),
            Err(Error::Dimension(_))
        ));
        let x = CTensor::zeros(&[3, 5, 5]);
        assert!(cconv2d_backward(&CTensor::zeros(&[2, 2, 2]), &x, &l, ConvGeometry::VALID).is_err());
    }

    #[test]
    fn param_count_formula() {
        let l = CConvLayer::zeros(12, 6, 3);
        assert_eq!(l.param_count(), 2 * 9 * 6 * 12 + 2 * 12);
    }
}
