//! Class maps as binary PGM (`P5`, maxval 255, 0 = unlabeled) with an
//! optional colour rendering (`P6`) driven by a JSON palette.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crpm_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl ClassMap {
    /// Zero-based class indices shifted to PGM values `1..=K`.
    pub fn from_classes(height: usize, width: usize, classes: &[usize]) -> Result<Self> {
        if classes.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} classes for a {}x{} map",
                classes.len(),
                height,
                width
            )));
        }
        let data = classes
            .iter()
            .map(|&c| {
                u8::try_from(c + 1).map_err(|_| Error::InvalidArgument(format!("class {} does not fit a PGM byte", c)))
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { height, width, data })
    }

    pub fn from_labels(height: usize, width: usize, labels: &[u16]) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch("label count does not match the map size".into()));
        }
        let data = labels
            .iter()
            .map(|&l| u8::try_from(l).map_err(|_| Error::InvalidArgument(format!("label {} does not fit a PGM byte", l))))
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { height, width, data })
    }

    pub fn labels(&self) -> Vec<u16> {
        self.data.iter().map(|&v| u16::from(v)).collect()
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let (fields, body) = netpbm_header(bytes, b"P5")?;
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(Error::Format(format!("PGM maxval {} (expected 255)", maxval)));
        }
        if body.len() != width * height {
            return Err(Error::Format(format!(
                "PGM body has {} bytes for a {}x{} image",
                body.len(),
                width,
                height
            )));
        }
        Ok(Self {
            height,
            width,
            data: body.to_vec(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_pgm(&fs::read(path)?)
    }

    pub fn to_ppm(&self, palette: &Palette) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for &v in &self.data {
            out.extend_from_slice(&palette.color(v));
        }
        out
    }
}

/// Parses the three numeric header fields of a binary netpbm image, skipping comments.
fn netpbm_header<'a>(bytes: &'a [u8], magic: &[u8]) -> Result<([usize; 3], &'a [u8])> {
    if !bytes.starts_with(magic) {
        return Err(Error::Format(format!("expected a {} image", String::from_utf8_lossy(magic))));
    }
    let mut pos = magic.len();
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated image header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed image header".into()))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("malformed image header".into()));
    }
    Ok((fields, &bytes[pos + 1..]))
}

/// Class value to RGB; value 0 (unlabeled) defaults to black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    pub colors: BTreeMap<u8, [u8; 3]>,
}

const BASE_COLORS: [[u8; 3]; 10] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
];

impl Palette {
    pub fn default_for(classes: usize) -> Self {
        let mut colors = BTreeMap::new();
        colors.insert(0, [0, 0, 0]);
        for k in 1..=classes.min(255) {
            colors.insert(k as u8, BASE_COLORS[(k - 1) % BASE_COLORS.len()]);
        }
        Self { colors }
    }

    pub fn color(&self, v: u8) -> [u8; 3] {
        self.colors.get(&v).copied().unwrap_or([128, 128, 128])
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.colors
                .iter()
                .map(|(k, c)| (k.to_string(), Value::from(c.to_vec())))
                .collect(),
        )
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Format("palette must be a JSON object".into()))?;
        let mut colors = BTreeMap::new();
        for (k, c) in obj {
            let key: u8 = k
                .parse()
                .map_err(|_| Error::Format(format!("palette key '{}' is not a class value", k)))?;
            let rgb: [u8; 3] = serde_json::from_value(c.clone())
                .map_err(|_| Error::Format(format!("palette entry '{}' is not an RGB triple", k)))?;
            colors.insert(key, rgb);
        }
        Ok(Self { colors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let m = ClassMap::from_classes(2, 3, &[0, 1, 2, 2, 1, 0]).unwrap();
        assert_eq!(m.data, vec![1, 2, 3, 3, 2, 1]);
        let bytes = m.to_pgm();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(ClassMap::from_pgm(&bytes).unwrap(), m);
    }

    #[test]
    fn pgm_with_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 7]);
        let m = ClassMap::from_pgm(&bytes).unwrap();
        assert_eq!((m.height, m.width, m.data.clone()), (1, 2, vec![0, 7]));
    }

    #[test]
    fn pgm_rejects_bad_input() {
        assert!(ClassMap::from_pgm(b"P6\n1 1\n255\n\0\0\0").is_err());
        assert!(ClassMap::from_pgm(b"P5\n2 2\n255\n\0").is_err());
        assert!(ClassMap::from_pgm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(ClassMap::from_classes(1, 1, &[300]).is_err());
    }

    #[test]
    fn ppm_uses_palette() {
        let m = ClassMap::from_labels(1, 2, &[0, 2]).unwrap();
        let p = Palette::default_for(3);
        let ppm = m.to_ppm(&p);
        let header = b"P6\n2 1\n255\n";
        assert_eq!(&ppm[header.len()..], &[0, 0, 0, 60, 180, 75]);
        assert_eq!(Palette::from_json(&p.to_json()).unwrap(), p);
    }
}
