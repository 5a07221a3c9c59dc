//! Patch, dense and tiled prediction.

use rayon::prelude::*;

use super::builders::{window_reach, FEAT_TAP, PATCH, TILE};
use super::exec::Executor;
use super::params::NetworkParams;
use super::spec::{NetKind, NetworkSpec};
use crate::ctensor::{mirror_extend, CTensor, ScoreMap};
use crate::error::{Error, Result};
use crate::polsar::tile_scene;

/// Halo around dilated tiles; with it every kept pixel sees its full window.
pub const DILATED_HALO: usize = 5;
/// Overlap stride of the fusion network's tiles.
pub const TILE_STRIDE: usize = 64;
/// Largest tile side for dilated scene inference; bounds memory on big scenes.
pub const DILATED_WINDOW: usize = 256;

fn expect_kind(spec: &NetworkSpec, kind: NetKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidNetwork(format!("expected a {:?} network, got {:?}", kind, spec.kind)));
    }
    Ok(())
}

/// Class probabilities of one `c x 10 x 10` window.
pub fn patch_forward(spec: &NetworkSpec, params: &NetworkParams, patch: &CTensor) -> Result<Vec<f64>> {
    expect_kind(spec, NetKind::CsCnn)?;
    let (_, h, w) = patch.dims3()?;
    if (h, w) != (PATCH, PATCH) {
        return Err(Error::Dimension(format!("patch must be {0}x{0}, got {1}x{2}", PATCH, h, w)));
    }
    let (out, _) = Executor::new(spec, params)?.infer(patch, &[])?;
    Ok(out.into_real()?.data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOutput {
    pub feat24: CTensor,
    /// Probabilities when requested, otherwise head scores.
    pub scores: ScoreMap,
}

pub fn dense_forward(spec: &NetworkSpec, params: &NetworkParams, image: &CTensor, softmax: bool) -> Result<DenseOutput> {
    expect_kind(spec, NetKind::Dilated)?;
    let (_, h, w) = image.dims3()?;
    if h < PATCH || w < PATCH {
        return Err(Error::Dimension(format!(
            "image {}x{} is smaller than the {}x{} receptive field",
            h, w, PATCH, PATCH
        )));
    }
    let trimmed;
    let spec = if softmax {
        spec
    } else {
        trimmed = spec.without_softmax();
        &trimmed
    };
    let (out, mut taps) = Executor::new(spec, params)?.infer(image, &[FEAT_TAP])?;
    Ok(DenseOutput {
        feat24: taps.remove(FEAT_TAP).expect("requested tap").into_complex()?,
        scores: out.into_real()?,
    })
}

/// Dense probabilities of one `c x 128 x 128` tile.
pub fn crpm_forward(spec: &NetworkSpec, params: &NetworkParams, tile: &CTensor) -> Result<ScoreMap> {
    expect_kind(spec, NetKind::Crpm)?;
    let (_, h, w) = tile.dims3()?;
    if (h, w) != (TILE, TILE) {
        return Err(Error::Dimension(format!("tile must be {0}x{0}, got {1}x{2}", TILE, h, w)));
    }
    Executor::new(spec, params)?.infer(tile, &[])?.0.into_real()
}

/// Tiles a scene, predicts each `window + 2 halo` tile, keeps the central
/// `window x window` of each prediction and averages overlaps.
///
/// Scenes smaller than the window are mirror-extended and cropped back; the
/// halo is mirror-extended around the whole scene. Tiles are evaluated in
/// parallel and blended in a fixed order, so the result does not depend on
/// the thread count.
pub fn sliding_inference<F>(scene: &CTensor, window: usize, stride: usize, halo: usize, predict: F) -> Result<ScoreMap>
where
    F: Fn(&CTensor) -> Result<ScoreMap> + Sync,
{
    let (_, h, w) = scene.dims3()?;
    let (eh, ew) = (h.max(window), w.max(window));
    let padded = mirror_extend(scene, halo, eh - h + halo, halo, ew - w + halo)?;
    let tiles = tile_scene(eh, ew, window, stride)?;
    let side = window + 2 * halo;
    let preds = tiles
        .par_iter()
        .map(|t| {
            let out = predict(&padded.crop(t.y0, t.x0, side, side)?)?;
            if (out.height, out.width) != (side, side) {
                return Err(Error::ShapeMismatch(format!(
                    "tile prediction is {}x{}, expected {}x{}",
                    out.height, out.width, side, side
                )));
            }
            out.crop(halo, halo, window, window)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = preds[0].classes;
    let mut sum = ScoreMap::zeros(k, eh, ew);
    let mut count = vec![0u32; eh * ew];
    for (t, p) in tiles.iter().zip(&preds) {
        if p.classes != k {
            return Err(Error::ShapeMismatch("tile predictions disagree on class count".into()));
        }
        for c in 0..k {
            for y in 0..window {
                let src = (c * window + y) * window;
                let dst = (c * eh + t.y0 + y) * ew + t.x0;
                for x in 0..window {
                    sum.data[dst + x] += p.data[src + x];
                }
            }
        }
        for y in 0..window {
            for x in 0..window {
                count[(t.y0 + y) * ew + t.x0 + x] += 1;
            }
        }
    }
    let n = eh * ew;
    for p in 0..n {
        let cnt = count[p] as f64;
        let mut total = 0.0;
        for c in 0..k {
            sum.data[c * n + p] /= cnt;
            total += sum.data[c * n + p];
        }
        if total > 0.0 {
            for c in 0..k {
                sum.data[c * n + p] /= total;
            }
        }
    }
    sum.crop(0, 0, h, w)
}

/// Full-scene dilated probabilities; mirror halos make every pixel match the patch classifier.
pub fn predict_dilated(spec: &NetworkSpec, params: &NetworkParams, scene: &CTensor) -> Result<ScoreMap> {
    expect_kind(spec, NetKind::Dilated)?;
    let (_, h, w) = scene.dims3()?;
    let window = DILATED_WINDOW.min(h.max(w));
    // halo tiles are exact, so non-overlapping tiles give the same map as any stride
    sliding_inference(scene, window, window, DILATED_HALO, |t| {
        Ok(dense_forward(spec, params, t, true)?.scores)
    })
}

pub fn predict_crpm(spec: &NetworkSpec, params: &NetworkParams, scene: &CTensor) -> Result<ScoreMap> {
    expect_kind(spec, NetKind::Crpm)?;
    sliding_inference(scene, TILE, TILE_STRIDE, 0, |t| crpm_forward(spec, params, t))
}

/// Mirror-extends a scene so that the window of every pixel lies inside it.
pub fn pad_for_windows(scene: &CTensor) -> Result<CTensor> {
    let r = window_reach();
    mirror_extend(scene, r.top, r.bottom, r.left, r.right)
}

/// Window of pixel `(y, x)` cut from a [`pad_for_windows`] scene.
pub fn window_at(padded: &CTensor, y: usize, x: usize) -> Result<CTensor> {
    padded.crop(y, x, PATCH, PATCH)
}

/// Runs the patch classifier once per pixel, one image row per parallel batch.
pub fn predict_patchwise(spec: &NetworkSpec, params: &NetworkParams, scene: &CTensor) -> Result<ScoreMap> {
    expect_kind(spec, NetKind::CsCnn)?;
    let (_, h, w) = scene.dims3()?;
    let padded = pad_for_windows(scene)?;
    let exec = Executor::new(spec, params)?;
    let k = spec.classes;
    let mut out = ScoreMap::zeros(k, h, w);
    let n = h * w;
    for y in 0..h {
        let row = (0..w)
            .into_par_iter()
            .map(|x| Ok(exec.infer(&window_at(&padded, y, x)?, &[])?.0.into_real()?.data))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        for (x, probs) in row.into_iter().enumerate() {
            for (c, v) in probs.into_iter().enumerate() {
                out.data[c * n + y * w + x] = v;
            }
        }
    }
    Ok(out)
}
