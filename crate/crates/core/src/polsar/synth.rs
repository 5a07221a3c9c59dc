use nalgebra::{Complex, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::CovarianceScene;
use crate::ctensor::CTensor;
use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Spatial arrangement of class regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `rows x cols` rectangular blocks; block `(i, j)` gets class `(i * cols + j) % K`.
    Checkerboard { rows: usize, cols: usize },
    /// Nearest-site regions; site `s` gets class `s % K`.
    Voronoi { sites: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WishartSpec {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub looks: usize,
    /// Per-class covariance; `None` uses [`auto_separated_sigmas`].
    pub sigmas: Option<Vec<Matrix3<C64>>>,
    pub layout: Layout,
    pub seed: u64,
}

/// Diagonal powers and the HH/VV correlation (magnitude, phase) of the built-in classes.
const DESIGN: [([f64; 3], f64, f64); 6] = [
    // odd-bounce surface: strong co-pol correlation, weak cross-pol
    ([1.0, 0.08, 0.7], 0.7, 0.0),
    // volume: balanced powers, strong cross-pol
    ([0.35, 0.25, 0.35], 0.3, 0.0),
    // double bounce: bright HH, anti-phase co-pol
    ([2.5, 0.15, 0.6], 0.6, std::f64::consts::PI),
    ([0.06, 0.01, 0.05], 0.2, 0.0),
    ([1.2, 0.9, 1.2], 0.8, std::f64::consts::FRAC_PI_2),
    ([0.6, 0.04, 0.15], 0.25, -std::f64::consts::FRAC_PI_2),
];

/// Deterministic, pairwise well-separated class covariances for any `k`.
pub fn auto_separated_sigmas(k: usize) -> Vec<Matrix3<C64>> {
    (0..k)
        .map(|c| {
            let (p, rho, phase) = DESIGN[c % DESIGN.len()];
            let scale = 4f64.powi((c / DESIGN.len()) as i32);
            let [a, b, d] = p.map(|v| v * scale);
            let off = C64::from_polar(rho * (a * d).sqrt(), phase);
            let z = C64::new(0.0, 0.0);
            Matrix3::new(
                C64::new(a, 0.0), z, off,
                z, C64::new(b, 0.0), z,
                off.conj(), z, C64::new(d, 0.0),
            )
        })
        .collect()
}

fn class_map(spec: &WishartSpec, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let (h, w, k) = (spec.height, spec.width, spec.classes);
    match spec.layout {
        Layout::Checkerboard { rows, cols } => {
            if rows == 0 || cols == 0 {
                return Err(Error::InvalidArgument("checkerboard needs at least one block".into()));
            }
            Ok((0..h * w)
                .map(|p| {
                    let (y, x) = (p / w, p % w);
                    let (i, j) = (y * rows / h, x * cols / w);
                    (i * cols + j) % k
                })
                .collect())
        }
        Layout::Voronoi { sites } => {
            if sites == 0 {
                return Err(Error::InvalidArgument("voronoi layout needs at least one site".into()));
            }
            let pts: Vec<(f64, f64)> = (0..sites)
                .map(|_| (rng.gen_range(0.0..h as f64), rng.gen_range(0.0..w as f64)))
                .collect();
            Ok((0..h * w)
                .map(|p| {
                    let (y, x) = ((p / w) as f64 + 0.5, (p % w) as f64 + 0.5);
                    let mut best = (f64::INFINITY, 0);
                    for (s, &(sy, sx)) in pts.iter().enumerate() {
                        let d = (sy - y).powi(2) + (sx - x).powi(2);
                        if d < best.0 {
                            best = (d, s);
                        }
                    }
                    best.1 % k
                })
                .collect())
        }
    }
}

fn validate_sigma(s: &Matrix3<C64>) -> Result<Matrix3<C64>> {
    let scale = s.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    if (s - s.adjoint()).iter().any(|v| v.norm() > 1e-12 * scale) {
        return Err(Error::InvalidArgument("class covariance is not Hermitian".into()));
    }
    // the complex Cholesky takes square roots of any sign, so definiteness is checked separately
    let min_eig = s.symmetric_eigenvalues().min();
    if !(min_eig > 1e-12 * scale) {
        return Err(Error::Precondition("class covariance is not positive definite".into()));
    }
    s.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Precondition("class covariance is not positive definite".into()))
}

/// Per-pixel sample covariances in full precision; [`synth_wishart_scene`] rounds them to f32.
fn sample(spec: &WishartSpec) -> Result<(Vec<Matrix3<C64>>, Vec<usize>)> {
    if spec.classes == 0 || spec.height == 0 || spec.width == 0 {
        return Err(Error::InvalidArgument("synthetic scene needs classes and a non-empty size".into()));
    }
    if spec.looks < 3 {
        return Err(Error::Precondition(format!(
            "at least 3 looks are needed for a positive definite sample covariance, got {}",
            spec.looks
        )));
    }
    let sigmas = match &spec.sigmas {
        Some(s) if s.len() != spec.classes => {
            return Err(Error::InvalidArgument(format!(
                "{} covariances given for {} classes",
                s.len(),
                spec.classes
            )))
        }
        Some(s) => s.clone(),
        None => auto_separated_sigmas(spec.classes),
    };
    let chol = sigmas.iter().map(validate_sigma).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = class_map(spec, &mut rng)?;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let draw = |rng: &mut ChaCha8Rng| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * half, im * half)
    };
    let inv_l = 1.0 / spec.looks as f64;
    let pixels = classes
        .iter()
        .map(|&k| {
            let mut acc = Matrix3::<C64>::zeros();
            for _ in 0..spec.looks {
                let n = Vector3::new(draw(&mut rng), draw(&mut rng), draw(&mut rng));
                let s = chol[k] * n;
                acc += s * s.adjoint();
            }
            acc * C64::new(inv_l, 0.0)
        })
        .collect();
    Ok((pixels, classes))
}

/// Multilook complex Wishart scene, `C = (1/L) sum_i s_i s_i^H` with `s_i ~ CN(0, Sigma_k)`.
///
/// Values are rounded to f32 so that a saved and reloaded scene is identical to the generated one.
pub fn synth_wishart_scene(spec: &WishartSpec) -> Result<CovarianceScene> {
    let (pixels, classes) = sample(spec)?;
    let n = pixels.len();
    let mut re = vec![0.0; 6 * n];
    let mut im = vec![0.0; 6 * n];
    const ENTRIES: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    for (p, m) in pixels.iter().enumerate() {
        for (e, &(i, j)) in ENTRIES.iter().enumerate() {
            re[e * n + p] = m[(i, j)].re as f32 as f64;
            im[e * n + p] = if i == j { 0.0 } else { m[(i, j)].im as f32 as f64 };
        }
    }
    let planes = CTensor::from_planes(&[6, spec.height, spec.width], re, im)?;
    let labels = classes.iter().map(|&k| k as u16 + 1).collect();
    let mut scene = CovarianceScene::new(planes, Some(labels))?;
    scene.class_count = spec.classes;
    Ok(scene)
}
