//! Complex max-pooling.
//!
//! The real and imaginary planes are pooled independently, each keeping its
//! own argmax. Padding replicates the edge pixel, so padded taps alias real
//! input coordinates and the backward pass always lands inside the image.

use serde::{Deserialize, Serialize};

use super::conv::Padding;
use crate::ctensor::CTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolGeometry {
    pub window: usize,
    pub stride: usize,
    pub dilation: usize,
    /// Replicate-edge padding per side.
    pub padding: Padding,
}

impl PoolGeometry {
    /// Non-overlapping `window x window` pooling.
    pub fn downsample(window: usize) -> Self {
        Self {
            window,
            stride: window,
            dilation: 1,
            padding: Padding::NONE,
        }
    }

    /// Stride-1 pooling whose output extent equals the input extent, padding bottom/right.
    pub fn dense(window: usize, dilation: usize) -> Self {
        let p = (window - 1) * dilation;
        Self {
            window,
            stride: 1,
            dilation,
            padding: Padding {
                top: 0,
                bottom: p,
                left: 0,
                right: p,
            },
        }
    }

    /// Stride-1 pooling padded on the top/left instead.
    pub fn dense_leading(window: usize, dilation: usize) -> Self {
        let p = (window - 1) * dilation;
        Self {
            window,
            stride: 1,
            dilation,
            padding: Padding {
                top: p,
                bottom: 0,
                left: p,
                right: 0,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.dilation == 0 || !(1..=2).contains(&self.stride) {
            return Err(Error::InvalidArgument(format!(
                "pool window {} stride {} dilation {}",
                self.window, self.stride, self.dilation
            )));
        }
        Ok(())
    }

    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let span = self.dilation * (self.window - 1) + 1;
        let ph = h + self.padding.top + self.padding.bottom;
        let pw = w + self.padding.left + self.padding.right;
        if ph < span || pw < span {
            return Err(Error::Dimension(format!(
                "pool window span {} does not fit a {}x{} input",
                span, h, w
            )));
        }
        Ok(((ph - span) / self.stride + 1, (pw - span) / self.stride + 1))
    }
}

/// Pooled output plus, per output element and per plane, the flat `y * w + x`
/// index of the selected input pixel within its channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRecord {
    pub output: CTensor,
    pub argmax_re: Vec<usize>,
    pub argmax_im: Vec<usize>,
    pub input_shape: Vec<usize>,
}

pub fn cmaxpool2d(x: &CTensor, g: PoolGeometry) -> Result<PoolRecord> {
    let (c, h, w) = x.dims3()?;
    let (oh, ow) = g.out_hw(h, w)?;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    // For each output row/col, list the (clamped) input coordinates of the window taps.
    let rows: Vec<Vec<usize>> = (0..oh)
        .map(|oy| {
            (0..g.window)
                .map(|t| {
                    clamp(
                        (oy * g.stride + t * g.dilation) as isize - g.padding.top as isize,
                        h,
                    )
                })
                .collect()
        })
        .collect();
    let cols: Vec<Vec<usize>> = (0..ow)
        .map(|ox| {
            (0..g.window)
                .map(|t| {
                    clamp(
                        (ox * g.stride + t * g.dilation) as isize - g.padding.left as isize,
                        w,
                    )
                })
                .collect()
        })
        .collect();
    let n_out = c * oh * ow;
    let mut out_re = Vec::with_capacity(n_out);
    let mut out_im = Vec::with_capacity(n_out);
    let mut arg_re = Vec::with_capacity(n_out);
    let mut arg_im = Vec::with_capacity(n_out);
    let pick = |plane: &[f64], ry: &[usize], cx: &[usize]| -> (f64, usize) {
        let mut best_i = ry[0] * w + cx[0];
        let mut best = plane[best_i];
        for &y in ry {
            for &x in cx {
                let i = y * w + x;
                if plane[i] > best {
                    best = plane[i];
                    best_i = i;
                }
            }
        }
        (best, best_i)
    };
    for ch in 0..c {
        let (pr, pi) = x.channel(ch);
        for ry in &rows {
            for cx in &cols {
                let (v, i) = pick(pr, ry, cx);
                out_re.push(v);
                arg_re.push(i);
                let (v, i) = pick(pi, ry, cx);
                out_im.push(v);
                arg_im.push(i);
            }
        }
    }
    Ok(PoolRecord {
        output: CTensor::from_planes_unchecked(vec![c, oh, ow], out_re, out_im),
        argmax_re: arg_re,
        argmax_im: arg_im,
        input_shape: x.shape().to_vec(),
    })
}

/// Routes each upstream gradient component to its recorded argmax, accumulating collisions.
pub fn cmaxpool2d_backward(grad_out: &CTensor, record: &PoolRecord) -> Result<CTensor> {
    if grad_out.shape() != record.output.shape() {
        return Err(Error::ShapeMismatch(format!(
            "pool gradient {:?} vs output {:?}",
            grad_out.shape(),
            record.output.shape()
        )));
    }
    let mut grad = CTensor::zeros(&record.input_shape);
    let (_, h, w) = grad.dims3()?;
    let plane_in = h * w;
    let plane_out = record.output.height() * record.output.width();
    let (gr, gi) = (grad_out.re(), grad_out.im());
    let (dr, di) = grad.planes_mut();
    for (j, (&ar, &ai)) in record.argmax_re.iter().zip(&record.argmax_im).enumerate() {
        let base = (j / plane_out) * plane_in;
        dr[base + ar] += gr[j];
        di[base + ai] += gi[j];
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planes_pool_independently() {
        let x = CTensor::from_planes(&[1, 2, 2], vec![1.0, 3.0, 2.0, 0.0], vec![0.0, 5.0, 1.0, -2.0])
            .unwrap();
        let r = cmaxpool2d(&x, PoolGeometry::downsample(2)).unwrap();
        assert_eq!((r.output.re()[0], r.output.im()[0]), (3.0, 5.0));
        assert_eq!((r.argmax_re[0], r.argmax_im[0]), (1, 1));

        let x = CTensor::from_planes(&[1, 2, 2], vec![1.0, 3.0, 2.0, 0.0], vec![0.0, 1.0, 5.0, -2.0])
            .unwrap();
        let r = cmaxpool2d(&x, PoolGeometry::downsample(2)).unwrap();
        assert_eq!((r.argmax_re[0], r.argmax_im[0]), (1, 2));
    }

    #[test]
    fn constant_input_ties_to_first() {
        let x = CTensor::from_planes(&[1, 4, 4], vec![2.0; 16], vec![-1.0; 16]).unwrap();
        let r = cmaxpool2d(&x, PoolGeometry::downsample(2)).unwrap();
        assert!(r.output.re().iter().all(|&v| v == 2.0));
        assert_eq!(r.argmax_re, vec![0, 2, 8, 10]);
        let g = CTensor::from_planes(&[1, 2, 2], vec![1.0; 4], vec![1.0; 4]).unwrap();
        let d = cmaxpool2d_backward(&g, &r).unwrap();
        assert_eq!(d.re()[0], 1.0);
        assert_eq!(d.re()[1], 0.0);
    }

    #[test]
    fn dense_pool_keeps_extent() {
        let x = CTensor::zeros(&[2, 7, 9]);
        for d in 1..=2 {
            let r = cmaxpool2d(&x, PoolGeometry::dense(2, d)).unwrap();
            assert_eq!(r.output.shape(), &[2, 7, 9]);
            let r = cmaxpool2d(&x, PoolGeometry::dense_leading(2, d)).unwrap();
            assert_eq!(r.output.shape(), &[2, 7, 9]);
        }
    }

    #[test]
    fn indices_stay_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, &[1, 6, 6]);
        let g = PoolGeometry::dense(2, 2);
        let r = cmaxpool2d(&x, g).unwrap();
        for (j, &a) in r.argmax_re.iter().enumerate() {
            let (oy, ox) = (j / 6, j % 6);
            let (y, xx) = (a / 6, a % 6);
            assert!(y == oy || y == (oy + 2).min(5));
            assert!(xx == ox || xx == (ox + 2).min(5));
        }
    }

    #[test]
    fn backward_conserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in [PoolGeometry::downsample(2), PoolGeometry::dense(2, 1), PoolGeometry::dense(2, 2)] {
            let x = random_tensor(&mut rng, &[3, 8, 8]);
            let r = cmaxpool2d(&x, g).unwrap();
            let up = random_tensor(&mut rng, r.output.shape());
            let d = cmaxpool2d_backward(&up, &r).unwrap();
            let s = |v: &[f64]| v.iter().sum::<f64>();
            assert!((s(d.re()) - s(up.re())).abs() < 1e-12);
            assert!((s(d.im()) - s(up.im())).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_geometry() {
        let x = CTensor::zeros(&[1, 4, 4]);
        let mut g = PoolGeometry::downsample(2);
        g.stride = 3;
        assert!(matches!(cmaxpool2d(&x, g), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            cmaxpool2d(&CTensor::zeros(&[1, 1, 1]), PoolGeometry::downsample(2)),
            Err(Error::Dimension(_))
        ));
    }
}
