use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{C11, C22, C33};
use crate::ctensor::CTensor;
use crate::error::{Error, Result};

pub const C3_MAGIC: &[u8; 4] = b"C3PX";
pub const C3_VERSION: u32 = 1;
/// Diagonal entries whose imaginary part exceeds this fraction of the real part are reported.
pub const DIAG_IMAG_TOLERANCE: f64 = 1e-6;

const HEADER_LEN: usize = 20;

/// Six unique entries of a per-pixel 3x3 Hermitian covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceScene {
    /// `[6, h, w]` in the order C11, C12, C13, C22, C23, C33.
    pub planes: CTensor,
    /// Row-major labels, `0` for unlabelled and `1..=class_count` otherwise.
    pub labels: Option<Vec<u16>>,
    pub class_count: usize,
}

impl CovarianceScene {
    pub fn new(planes: CTensor, labels: Option<Vec<u16>>) -> Result<Self> {
        let (c, h, w) = planes.dims3()?;
        if c != 6 {
            return Err(Error::ShapeMismatch(format!("covariance scene needs 6 planes, got {}", c)));
        }
        planes.ensure_finite("covariance scene")?;
        if let Some(l) = &labels {
            if l.len() != h * w {
                return Err(Error::ShapeMismatch(format!(
                    "label map has {} pixels, scene {}x{}",
                    l.len(),
                    h,
                    w
                )));
            }
        }
        let class_count = labels
            .as_ref()
            .map_or(0, |l| l.iter().copied().max().unwrap_or(0) as usize);
        Ok(Self {
            planes,
            labels,
            class_count,
        })
    }

    pub fn height(&self) -> usize {
        self.planes.height()
    }

    pub fn width(&self) -> usize {
        self.planes.width()
    }

    /// Full 3x3 matrix at a pixel, row-major `(re, im)` pairs.
    pub fn matrix(&self, y: usize, x: usize) -> [[(f64, f64); 3]; 3] {
        let n = self.height() * self.width();
        let idx = y * self.width() + x;
        let e = |p: usize| self.planes.get(p * n + idx);
        let conj = |(r, i): (f64, f64)| (r, -i);
        let (c11, c12, c13, c22, c23, c33) = (e(0), e(1), e(2), e(3), e(4), e(5));
        [
            [c11, c12, c13],
            [conj(c12), c22, c23],
            [conj(c13), conj(c23), c33],
        ]
    }

    /// Clears imaginary parts on the diagonal planes that exceed tolerance; returns how many.
    fn coerce_diagonals(&mut self) -> usize {
        let n = self.height() * self.width();
        let (re, im) = self.planes.planes_mut();
        let mut coerced = 0;
        for p in [C11, C22, C33] {
            for i in p * n..(p + 1) * n {
                if im[i].abs() > DIAG_IMAG_TOLERANCE * re[i].abs().max(f64::MIN_POSITIVE) {
                    im[i] = 0.0;
                    coerced += 1;
                }
            }
        }
        coerced
    }
}

/// Parses a C3 container. Returns the scene and how many diagonal entries were coerced to real.
pub fn read_c3<R: Read>(mut reader: R) -> Result<(CovarianceScene, usize)> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("C3 header needs {} bytes, got {}", HEADER_LEN, bytes.len())));
    }
    if &bytes[..4] != C3_MAGIC {
        return Err(Error::Format("bad magic: not a C3PX file".into()));
    }
    let version = LittleEndian::read_u32(&bytes[4..8]);
    if version != C3_VERSION {
        return Err(Error::Format(format!("unsupported C3 version {}", version)));
    }
    let h = LittleEndian::read_u32(&bytes[8..12]) as usize;
    let w = LittleEndian::read_u32(&bytes[12..16]) as usize;
    let flags = LittleEndian::read_u32(&bytes[16..20]);
    let has_labels = flags & 1 == 1;
    let n = h * w;
    let plane_bytes = 6 * n * 8;
    let expected = HEADER_LEN + plane_bytes + if has_labels { 2 * n } else { 0 };
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "C3 payload length mismatch: expected {} bytes for {}x{}, got {}",
            expected,
            h,
            w,
            bytes.len()
        )));
    }
    let body = &bytes[HEADER_LEN..HEADER_LEN + plane_bytes];
    let mut re = Vec::with_capacity(6 * n);
    let mut im = Vec::with_capacity(6 * n);
    for pair in body.chunks_exact(8) {
        re.push(LittleEndian::read_f32(&pair[..4]) as f64);
        im.push(LittleEndian::read_f32(&pair[4..]) as f64);
    }
    let labels = has_labels.then(|| {
        bytes[HEADER_LEN + plane_bytes..]
            .chunks_exact(2)
            .map(LittleEndian::read_u16)
            .collect::<Vec<u16>>()
    });
    let planes = CTensor::from_planes(&[6, h, w], re, im)?;
    let mut scene = CovarianceScene::new(planes, labels)?;
    let coerced = scene.coerce_diagonals();
    Ok((scene, coerced))
}

pub fn load_c3(path: &Path) -> Result<CovarianceScene> {
    let (scene, coerced) = read_c3(BufReader::new(File::open(path)?))?;
    if coerced > 0 {
        log::warn!(
            "{}: {} diagonal covariance entries had imaginary parts above tolerance and were set real",
            path.display(),
            coerced
        );
    }
    Ok(scene)
}

pub fn write_c3<W: Write>(mut out: W, scene: &CovarianceScene) -> Result<()> {
    let (h, w) = (scene.height(), scene.width());
    out.write_all(C3_MAGIC)?;
    out.write_u32::<LittleEndian>(C3_VERSION)?;
    out.write_u32::<LittleEndian>(h as u32)?;
    out.write_u32::<LittleEndian>(w as u32)?;
    out.write_u32::<LittleEndian>(scene.labels.is_some() as u32)?;
    for (&r, &i) in scene.planes.re().iter().zip(scene.planes.im()) {
        out.write_f32::<LittleEndian>(r as f32)?;
        out.write_f32::<LittleEndian>(i as f32)?;
    }
    if let Some(labels) = &scene.labels {
        for &l in labels {
            out.write_u16::<LittleEndian>(l)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_c3(path: &Path, scene: &CovarianceScene) -> Result<()> {
    write_c3(BufWriter::new(File::create(path)?), scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> CovarianceScene {
        let n = 6;
        let mut re = vec![0.0; 6 * n];
        let mut im = vec![0.0; 6 * n];
        for i in 0..6 * n {
            re[i] = (i as f64 * 0.37).sin() as f32 as f64;
            im[i] = if [0, 3, 5].contains(&(i / n)) { 0.0 } else { (i as f64 * 0.11).cos() as f32 as f64 };
        }
        let planes = CTensor::from_planes(&[6, 2, 3], re, im).unwrap();
        CovarianceScene::new(planes, Some(vec![0, 1, 2, 2, 1, 3])).unwrap()
    }

    fn encode(s: &CovarianceScene) -> Vec<u8> {
        let mut buf = Vec::new();
        write_c3(&mut buf, s).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_exact() {
        let s = scene();
        let buf = encode(&s);
        assert_eq!(buf.len(), 20 + 6 * 6 * 8 + 12);
        let (back, coerced) = read_c3(&buf[..]).unwrap();
        assert_eq!(coerced, 0);
        assert_eq!(back, s);
        assert_eq!(back.class_count, 3);
        assert_eq!(encode(&back), buf);
    }

    #[test]
    fn header_layout() {
        let buf = encode(&scene());
        assert_eq!(&buf[..4], b"C3PX");
        assert_eq!(LittleEndian::read_u32(&buf[4..]), 1);
        assert_eq!(LittleEndian::read_u32(&buf[8..]), 2);
        assert_eq!(LittleEndian::read_u32(&buf[12..]), 3);
        assert_eq!(LittleEndian::read_u32(&buf[16..]), 1);
        // first C11 pair
        assert_eq!(LittleEndian::read_f32(&buf[20..]), 0.0);
    }

    #[test]
    fn diagonal_imaginary_is_coerced() {
        let mut s = scene();
        s.planes.re_mut()[0] = 1.0;
        s.planes.im_mut()[0] = 1e-3;
        s.planes.re_mut()[3 * 6 + 1] = 1.0;
        s.planes.im_mut()[3 * 6 + 1] = 1e-9;
        let (back, coerced) = read_c3(&encode(&s)[..]).unwrap();
        assert_eq!(coerced, 1);
        assert_eq!(back.planes.im()[0], 0.0);
        assert_eq!(back.planes.im()[3 * 6 + 1], 1e-9f32 as f64);
    }

    #[test]
    fn malformed_files() {
        let buf = encode(&scene());
        let err = read_c3(&buf[..buf.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("length")));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_c3(&bad[..]), Err(Error::Format(_))));
        let mut nan = buf.clone();
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_c3(&nan[..]), Err(Error::NonFinite(_))));
        assert!(read_c3(&buf[..10]).is_err());
    }

    #[test]
    fn unlabelled_scene() {
        let mut s = scene();
        s.labels = None;
        let buf = encode(&s);
        assert_eq!(LittleEndian::read_u32(&buf[16..]), 0);
        let (back, _) = read_c3(&buf[..]).unwrap();
        assert!(back.labels.is_none());
    }

    #[test]
    fn matrix_is_hermitian() {
        let s = scene();
        let m = s.matrix(1, 2);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j].0, m[j][i].0);
                assert_eq!(m[i][j].1, -m[j][i].1);
            }
        }
    }
}
