//! Learnable x2 upsampling by transposed complex convolution.
//!
//! The kernel is stored `[in, out, 2, 2]`, which is also the layout of the
//! stride-2 convolution it transposes (`[out', in', 2, 2]` with the roles of
//! the channel counts swapped). Each input pixel scatters `w * v` into a 2x2
//! output block, so under the bilinear pairing `Re(sum a b)` the two maps are
//! exact adjoints:
//!
//! `Re<conv_s2(a, w), b> = Re<a, tconv(b, w)>`.

use super::conv::{CConvLayer, GradBundle};
use crate::ctensor::CTensor;
use crate::error::{Error, Result};

pub const UPSAMPLE: usize = 2;

fn check(x: &CTensor, layer: &CConvLayer) -> Result<(usize, usize, usize, usize)> {
    let (c_in, h, w) = x.dims3()?;
    if layer.kernel() != UPSAMPLE {
        return Err(Error::Dimension(format!(
            "transposed convolution needs a {k}x{k} kernel, got {0}x{0}",
            layer.kernel(),
            k = UPSAMPLE
        )));
    }
    if layer.out_channels() != c_in {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, transposed kernel expects {}",
            c_in,
            layer.out_channels()
        )));
    }
    Ok((c_in, layer.in_channels(), h, w))
}

/// Output channel count of a transposed layer (second kernel dimension).
pub fn tconv_out_channels(layer: &CConvLayer) -> usize {
    layer.in_channels()
}

/// Builds a transposed layer with `[in, out, 2, 2]` kernel and `[out]` bias.
pub fn tconv_layer(weights: CTensor, bias: CTensor) -> Result<CConvLayer> {
    let s = weights.shape();
    if s.len() != 4 || s[2] != UPSAMPLE || s[3] != UPSAMPLE {
        return Err(Error::ShapeMismatch(format!(
            "transposed kernel must be [in, out, 2, 2], got {:?}",
            s
        )));
    }
    if bias.shape() != [s[1]] {
        return Err(Error::ShapeMismatch(format!(
            "transposed bias {:?} does not match {} output channels",
            bias.shape(),
            s[1]
        )));
    }
    Ok(CConvLayer { weights, bias })
}

pub fn ctransconv2d(x: &CTensor, layer: &CConvLayer) -> Result<CTensor> {
    let (c_in, c_out, h, w) = check(x, layer)?;
    if layer.bias.len() != c_out {
        return Err(Error::ShapeMismatch("transposed bias length".into()));
    }
    let (oh, ow) = (h * UPSAMPLE, w * UPSAMPLE);
    let mut re = vec![0.0; c_out * oh * ow];
    let mut im = vec![0.0; c_out * oh * ow];
    let (xr, xi) = (x.re(), x.im());
    let (wr, wi) = (layer.weights.re(), layer.weights.im());
    let plane_in = h * w;
    for c in 0..c_out {
        let out_r = &mut re[c * oh * ow..(c + 1) * oh * ow];
        let out_i = &mut im[c * oh * ow..(c + 1) * oh * ow];
        for o in 0..c_in {
            let src_r = &xr[o * plane_in..(o + 1) * plane_in];
            let src_i = &xi[o * plane_in..(o + 1) * plane_in];
            for p in 0..UPSAMPLE {
                for q in 0..UPSAMPLE {
                    let widx = ((o * c_out + c) * UPSAMPLE + p) * UPSAMPLE + q;
                    let (a, b) = (wr[widx], wi[widx]);
                    for i in 0..h {
                        let orow = (UPSAMPLE * i + p) * ow + q;
                        let srow = i * w;
                        for j in 0..w {
                            let (vr, vi) = (src_r[srow + j], src_i[srow + j]);
                            out_r[orow + UPSAMPLE * j] += a * vr - b * vi;
                            out_i[orow + UPSAMPLE * j] += a * vi + b * vr;
                        }
                    }
                }
            }
        }
        let (br, bi) = (layer.bias.re()[c], layer.bias.im()[c]);
        out_r.iter_mut().for_each(|v| *v += br);
        out_i.iter_mut().for_each(|v| *v += bi);
    }
    let out = CTensor::from_planes_unchecked(vec![c_out, oh, ow], re, im);
    out.ensure_finite("ctransconv2d")?;
    Ok(out)
}

pub fn ctransconv2d_backward(grad_out: &CTensor, x: &CTensor, layer: &CConvLayer) -> Result<GradBundle> {
    let (c_in, c_out, h, w) = check(x, layer)?;
    let (oh, ow) = (h * UPSAMPLE, w * UPSAMPLE);
    if grad_out.shape() != [c_out, oh, ow] {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient {:?} vs output [{}, {}, {}]",
            grad_out.shape(),
            c_out,
            oh,
            ow
        )));
    }
    let (xr, xi) = (x.re(), x.im());
    let (gr, gi) = (grad_out.re(), grad_out.im());
    let (wr, wi) = (layer.weights.re(), layer.weights.im());
    let plane_in = h * w;
    let plane_out = oh * ow;
    let mut dxr = vec![0.0; x.len()];
    let mut dxi = vec![0.0; x.len()];
    let mut dwr = vec![0.0; layer.weights.len()];
    let mut dwi = vec![0.0; layer.weights.len()];
    for o in 0..c_in {
        let src_r = &xr[o * plane_in..(o + 1) * plane_in];
        let src_i = &xi[o * plane_in..(o + 1) * plane_in];
        let dst_r = &mut dxr[o * plane_in..(o + 1) * plane_in];
        let dst_i = &mut dxi[o * plane_in..(o + 1) * plane_in];
        for c in 0..c_out {
            let g_r = &gr[c * plane_out..(c + 1) * plane_out];
            let g_i = &gi[c * plane_out..(c + 1) * plane_out];
            for p in 0..UPSAMPLE {
                for q in 0..UPSAMPLE {
                    let widx = ((o * c_out + c) * UPSAMPLE + p) * UPSAMPLE + q;
                    let (a, b) = (wr[widx], wi[widx]);
                    let (mut acc_r, mut acc_i) = (0.0, 0.0);
                    for i in 0..h {
                        let orow = (UPSAMPLE * i + p) * ow + q;
                        let srow = i * w;
                        for j in 0..w {
                            let (u, v) = (g_r[orow + UPSAMPLE * j], g_i[orow + UPSAMPLE * j]);
                            let (vr, vi) = (src_r[srow + j], src_i[srow + j]);
                            // dL/dw = sum g conj(x); dL/dx = sum conj(w) g
                            acc_r += u * vr + v * vi;
                            acc_i += v * vr - u * vi;
                            dst_r[srow + j] += a * u + b * v;
                            dst_i[srow + j] += a * v - b * u;
                        }
                    }
                    dwr[widx] = acc_r;
                    dwi[widx] = acc_i;
                }
            }
        }
    }
    let bias_r = (0..c_out)
        .map(|c| gr[c * plane_out..(c + 1) * plane_out].iter().sum())
        .collect();
    let bias_i = (0..c_out)
        .map(|c| gi[c * plane_out..(c + 1) * plane_out].iter().sum())
        .collect();
    Ok(GradBundle {
        grad_input: CTensor::from_planes_unchecked(x.shape().to_vec(), dxr, dxi),
        grad_weights: CTensor::from_planes_unchecked(layer.weights.shape().to_vec(), dwr, dwi),
        grad_bias: CTensor::from_planes_unchecked(vec![c_out], bias_r, bias_i),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cops::conv::{cconv2d, ConvGeometry};
    use crate::testutil::random_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bilinear(a: &CTensor, b: &CTensor) -> f64 {
        a.re().iter().zip(b.re()).map(|(x, y)| x * y).sum::<f64>()
            - a.im().iter().zip(b.im()).map(|(x, y)| x * y).sum::<f64>()
    }

    fn euclid(a: &CTensor, b: &CTensor) -> f64 {
        a.re().iter().zip(b.re()).map(|(x, y)| x * y).sum::<f64>()
            + a.im().iter().zip(b.im()).map(|(x, y)| x * y).sum::<f64>()
    }

    fn conj(t: &CTensor) -> CTensor {
        CTensor::from_planes(t.shape(), t.re().to_vec(), t.im().iter().map(|v| -v).collect()).unwrap()
    }

    #[test]
    fn single_pixel_scatters_products() {
        let x = CTensor::from_planes(&[1, 1, 1], vec![1.0], vec![2.0]).unwrap();
        let w = CTensor::from_planes(&[1, 1, 2, 2], vec![1.0, 0.0, -1.0, 3.0], vec![0.0, 1.0, 2.0, -1.0]).unwrap();
        let l = tconv_layer(w.clone(), CTensor::zeros(&[1])).unwrap();
        let y = ctransconv2d(&x, &l).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        for i in 0..4 {
            let (a, b) = w.get(i);
            assert_eq!(y.get(i), (a * 1.0 - b * 2.0, a * 2.0 + b * 1.0));
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_tensor(&mut rng, &[3, 2, 2, 2]);
        let l = tconv_layer(w, CTensor::zeros(&[2])).unwrap();
        let y = ctransconv2d(&CTensor::zeros(&[3, 4, 5]), &l).unwrap();
        assert_eq!(y.shape(), &[2, 8, 10]);
        assert!(y.re().iter().chain(y.im()).all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_of_stride_two_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let w = random_tensor(&mut rng, &[5, 3, 2, 2]);
            let small = random_tensor(&mut rng, &[5, 4, 6]);
            let big = random_tensor(&mut rng, &[3, 8, 12]);
            let t = tconv_layer(w.clone(), CTensor::zeros(&[3])).unwrap();
            let conv = CConvLayer::new(w.clone(), CTensor::zeros(&[5])).unwrap();
            let lhs = bilinear(&cconv2d(&big, &conv, ConvGeometry::strided(2)).unwrap(), &small);
            let rhs = bilinear(&big, &ctransconv2d(&small, &t).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));

            let conj_conv = CConvLayer::new(conj(&w), CTensor::zeros(&[5])).unwrap();
            let lhs = euclid(&cconv2d(&big, &conj_conv, ConvGeometry::strided(2)).unwrap(), &small);
            let rhs = euclid(&big, &ctransconv2d(&small, &t).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn geometry_errors() {
        let l = CConvLayer::zeros(3, 2, 3);
        assert!(ctransconv2d(&CTensor::zeros(&[3, 2, 2]), &l).is_err());
        let l = tconv_layer(CTensor::zeros(&[3, 2, 2, 2]), CTensor::zeros(&[2])).unwrap();
        assert!(ctransconv2d(&CTensor::zeros(&[4, 2, 2]), &l).is_err());
    }
}
