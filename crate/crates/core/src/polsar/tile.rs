use crate::ctensor::{mirror_extend, CTensor};
use crate::error::{Error, Result};

/// Placement of one square window; the tile may extend past the scene when the scene is smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub y0: usize,
    pub x0: usize,
    pub size: usize,
}

/// Window offsets along one axis: multiples of `stride`, with the last window clamped to the edge.
pub fn tile_offsets(extent: usize, window: usize, stride: usize) -> Vec<usize> {
    if extent <= window {
        return vec![0];
    }
    let mut out = vec![0];
    let mut off = 0;
    while off + window < extent {
        off = (off + stride).min(extent - window);
        out.push(off);
    }
    out
}

/// Row-major grid of windows covering every pixel.
pub fn tile_scene(height: usize, width: usize, window: usize, stride: usize) -> Result<Vec<Tile>> {
    if window == 0 || stride == 0 || stride > window {
        return Err(Error::InvalidArgument(format!(
            "tiling needs 0 < stride <= window, got window {} stride {}",
            window, stride
        )));
    }
    let ys = tile_offsets(height, window, stride);
    let xs = tile_offsets(width, window, stride);
    Ok(ys
        .iter()
        .flat_map(|&y0| xs.iter().map(move |&x0| Tile { y0, x0, size: window }))
        .collect())
}

/// Cuts a tile, mirror-extending the bottom/right when the scene is smaller than the window.
pub fn extract_tile(x: &CTensor, tile: Tile) -> Result<CTensor> {
    let (_, h, w) = x.dims3()?;
    let bottom = (tile.y0 + tile.size).saturating_sub(h);
    let right = (tile.x0 + tile.size).saturating_sub(w);
    if bottom > 0 || right > 0 {
        mirror_extend(x, 0, bottom, 0, right)?.crop(tile.y0, tile.x0, tile.size, tile.size)
    } else {
        x.crop(tile.y0, tile.x0, tile.size, tile.size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn offset_grids() {
        assert_eq!(tile_scene(128, 128, 128, 64).unwrap().len(), 1);
        assert_eq!(tile_offsets(256, 128, 64), vec![0, 64, 128]);
        assert_eq!(tile_scene(256, 256, 128, 64).unwrap().len(), 9);
        assert_eq!(tile_offsets(300, 128, 64), vec![0, 64, 128, 172]);
        assert_eq!(tile_offsets(50, 128, 64), vec![0]);
        assert!(tile_scene(10, 10, 4, 5).is_err());
    }

    #[test]
    fn tiles_cover_every_pixel() {
        for (h, w) in [(130, 200), (64, 300), (257, 129)] {
            let mut hit = vec![false; h * w];
            for t in tile_scene(h, w, 128, 64).unwrap() {
                for y in t.y0..(t.y0 + t.size).min(h) {
                    for x in t.x0..(t.x0 + t.size).min(w) {
                        hit[y * w + x] = true;
                    }
                }
            }
            assert!(hit.iter().all(|&b| b));
        }
    }

    #[test]
    fn non_overlapping_reassembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, &[2, 12, 12]);
        let mut re = vec![0.0; x.len()];
        let mut im = vec![0.0; x.len()];
        for t in tile_scene(12, 12, 4, 4).unwrap() {
            let p = extract_tile(&x, t).unwrap();
            for c in 0..2 {
                for y in 0..4 {
                    for xx in 0..4 {
                        let dst = (c * 12 + t.y0 + y) * 12 + t.x0 + xx;
                        let src = (c * 4 + y) * 4 + xx;
                        re[dst] = p.re()[src];
                        im[dst] = p.im()[src];
                    }
                }
            }
        }
        assert_eq!(CTensor::from_planes(&[2, 12, 12], re, im).unwrap(), x);
    }

    #[test]
    fn small_scene_is_mirrored() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&mut rng, &[1, 3, 5]);
        let t = extract_tile(&x, Tile { y0: 0, x0: 0, size: 8 }).unwrap();
        assert_eq!(t.shape(), &[1, 8, 8]);
        assert_eq!(t.crop(0, 0, 3, 5).unwrap(), x);
        // row 3 mirrors row 1
        assert_eq!(t.re()[3 * 8], x.re()[5]);
    }
}
