//! Trained model container.
//!
//! Layout: `"CRPM"`, u32 LE version, u64 LE header length, a UTF-8 JSON
//! header, then one payload per entry of the header's `tensors` list. Each
//! payload is a u32 LE rank, the u32 LE dims, and the row-major f32 LE real
//! plane followed by the imaginary plane. A head is stored as a `[5]` tensor
//! `(w_re, w_im, w_mag, w_phase, bias)` with a zero imaginary plane.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde_json::{json, Value};

use crpm_core::cops::{CConvLayer, HeadParams};
use crpm_core::nets::{LayerSpec, NetKind, NetworkParams, NetworkSpec, PATCH, TILE};
use crpm_core::polsar::NormStats;
use crpm_core::training::TrainConfig;
use crpm_core::{CTensor, Error, Result};

pub const MAGIC: &[u8; 4] = b"CRPM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub norm: NormStats,
    /// Configuration the weights were trained with, if any.
    pub config: Option<TrainConfig>,
    pub seed: u64,
}

pub fn config_to_json(cfg: &TrainConfig) -> Value {
    json!({
        "lr_step1": cfg.lr_step1,
        "lr_step2": cfg.lr_step2,
        "batch_step1": cfg.batch_step1,
        "batch_step2": cfg.batch_step2,
        "epochs_step1": cfg.epochs_step1,
        "epochs_step2": cfg.epochs_step2,
        "alpha": cfg.alpha,
        "gamma": cfg.gamma,
        "w_train": cfg.w_train,
        "w_error": cfg.w_error,
        "w_else": cfg.w_else,
        "per_class_count": cfg.per_class_count,
        "max_rate": cfg.max_rate,
        "seed": cfg.seed,
    })
}

pub fn config_from_json(v: &Value) -> Result<TrainConfig> {
    let f = |k: &str| {
        v.get(k)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Format(format!("training config lacks '{}'", k)))
    };
    let u = |k: &str| {
        v.get(k)
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format(format!("training config lacks '{}'", k)))
    };
    Ok(TrainConfig {
        lr_step1: f("lr_step1")?,
        lr_step2: f("lr_step2")?,
        batch_step1: u("batch_step1")? as usize,
        batch_step2: u("batch_step2")? as usize,
        epochs_step1: u("epochs_step1")? as usize,
        epochs_step2: u("epochs_step2")? as usize,
        alpha: f("alpha")?,
        gamma: f("gamma")?,
        w_train: f("w_train")?,
        w_error: f("w_error")?,
        w_else: f("w_else")?,
        per_class_count: u("per_class_count")? as usize,
        max_rate: f("max_rate")?,
        seed: u("seed")?,
    })
}

enum Slot {
    Weights(String),
    Bias(String),
    Head(String),
}

fn slots(params: &NetworkParams) -> Vec<Slot> {
    let mut v = Vec::new();
    for name in params.convs.keys() {
        v.push(Slot::Weights(name.clone()));
        v.push(Slot::Bias(name.clone()));
    }
    v.extend(params.heads.keys().cloned().map(Slot::Head));
    v
}

fn slot_json(slot: &Slot, params: &NetworkParams) -> Value {
    match slot {
        Slot::Weights(n) => json!({"group": n, "role": "weights", "shape": params.convs[n].weights.shape()}),
        Slot::Bias(n) => json!({"group": n, "role": "bias", "shape": params.convs[n].bias.shape()}),
        Slot::Head(n) => json!({"group": n, "role": "head", "shape": [5]}),
    }
}

fn kind_name(kind: NetKind) -> &'static str {
    match kind {
        NetKind::CsCnn => "cs",
        NetKind::Dilated => "dilated",
        NetKind::Crpm => "crpm",
    }
}

fn kind_from_name(s: &str) -> Result<NetKind> {
    match s {
        "cs" => Ok(NetKind::CsCnn),
        "dilated" => Ok(NetKind::Dilated),
        "crpm" => Ok(NetKind::Crpm),
        other => Err(Error::Format(format!("unknown network kind '{}'", other))),
    }
}

fn write_tensor<W: Write>(out: &mut W, shape: &[usize], re: &[f64], im: &[f64]) -> Result<()> {
    out.write_u32::<LittleEndian>(shape.len() as u32)?;
    for &d in shape {
        out.write_u32::<LittleEndian>(d as u32)?;
    }
    for &v in re.iter().chain(im) {
        out.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

fn read_tensor<R: Read>(input: &mut R, expect: &[usize]) -> Result<CTensor> {
    let rank = input.read_u32::<LittleEndian>()? as usize;
    if rank != expect.len() {
        return Err(Error::Format(format!("tensor rank {} but the header declares {:?}", rank, expect)));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(input.read_u32::<LittleEndian>()? as usize);
    }
    if shape != expect {
        return Err(Error::Format(format!("tensor shape {:?} but the header declares {:?}", shape, expect)));
    }
    let n: usize = shape.iter().product();
    let mut plane = |n: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0f32; n];
        input.read_f32_into::<LittleEndian>(&mut buf)?;
        Ok(buf.into_iter().map(f64::from).collect())
    };
    let re = plane(n)?;
    let im = plane(n)?;
    CTensor::from_planes(&shape, re, im)
}

impl ModelFile {
    fn header(&self) -> Value {
        let slots = slots(&self.params);
        json!({
            "kind": kind_name(self.spec.kind),
            "classes": self.spec.classes,
            "in_channels": self.spec.in_channels,
            "seed": self.seed,
            "layers": self.spec.layers,
            "frozen": self.params.frozen,
            "normalization": self.norm.to_json(),
            "train_config": self.config.as_ref().map(config_to_json),
            "tensors": slots.iter().map(|s| slot_json(s, &self.params)).collect::<Vec<_>>(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(VERSION)?;
        out.write_u64::<LittleEndian>(header.len() as u64)?;
        out.extend_from_slice(&header);
        for slot in slots(&self.params) {
            match slot {
                Slot::Weights(n) => {
                    let t = &self.params.convs[&n].weights;
                    write_tensor(&mut out, t.shape(), t.re(), t.im())?;
                }
                Slot::Bias(n) => {
                    let t = &self.params.convs[&n].bias;
                    write_tensor(&mut out, t.shape(), t.re(), t.im())?;
                }
                Slot::Head(n) => {
                    write_tensor(&mut out, &[5], &self.params.heads[&n].to_array(), &[0.0; 5])?;
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut input = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = input.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported model version {}", version)));
        }
        let len = input.read_u64::<LittleEndian>()? as usize;
        let start = input.position() as usize;
        let header_bytes = bytes
            .get(start..start + len)
            .ok_or_else(|| Error::Format("model header is truncated".into()))?;
        let header: Value = serde_json::from_slice(header_bytes)?;
        input.set_position((start + len) as u64);

        let field = |k: &str| header.get(k).ok_or_else(|| Error::Format(format!("model header lacks '{}'", k)));
        let kind = kind_from_name(field("kind")?.as_str().unwrap_or_default())?;
        let classes = field("classes")?.as_u64().ok_or_else(|| Error::Format("bad class count".into()))? as usize;
        let in_channels = field("in_channels")?
            .as_u64()
            .ok_or_else(|| Error::Format("bad channel count".into()))? as usize;
        let seed = field("seed")?.as_u64().ok_or_else(|| Error::Format("bad seed".into()))?;
        let layers: Vec<LayerSpec> = serde_json::from_value(field("layers")?.clone())?;
        let frozen: BTreeSet<String> = serde_json::from_value(field("frozen")?.clone())?;
        let norm = NormStats::from_json(field("normalization")?)?;
        let config = match field("train_config")? {
            Value::Null => None,
            v => Some(config_from_json(v)?),
        };
        let entries = field("tensors")?
            .as_array()
            .ok_or_else(|| Error::Format("tensor list is not an array".into()))?;

        let mut weights: BTreeMap<String, CTensor> = BTreeMap::new();
        let mut biases: BTreeMap<String, CTensor> = BTreeMap::new();
        let mut heads = BTreeMap::new();
        for e in entries {
            let group = e
                .get("group")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Format("tensor entry lacks a group".into()))?
                .to_string();
            let shape: Vec<usize> = serde_json::from_value(
                e.get("shape")
                    .cloned()
                    .ok_or_else(|| Error::Format("tensor entry lacks a shape".into()))?,
            )?;
            let t = read_tensor(&mut input, &shape)?;
            match e.get("role").and_then(Value::as_str) {
                Some("weights") => {
                    weights.insert(group, t);
                }
                Some("bias") => {
                    biases.insert(group, t);
                }
                Some("head") => {
                    let r = t.re();
                    heads.insert(group, HeadParams::from_array([r[0], r[1], r[2], r[3], r[4]]));
                }
                other => return Err(Error::Format(format!("unknown tensor role {:?}", other))),
            }
        }
        if input.position() as usize != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - input.position() as usize
            )));
        }
        let mut convs = BTreeMap::new();
        for (name, w) in weights {
            let b = biases
                .remove(&name)
                .ok_or_else(|| Error::Format(format!("group '{}' has weights but no bias", name)))?;
            convs.insert(name, CConvLayer { weights: w, bias: b });
        }
        if let Some(name) = biases.keys().next() {
            return Err(Error::Format(format!("group '{}' has a bias but no weights", name)));
        }
        let spec = NetworkSpec {
            kind,
            in_channels,
            classes,
            layers,
        };
        let params = NetworkParams { convs, heads, frozen };
        // reject files whose layers reference missing or misshapen groups
        let probe = match kind {
            NetKind::CsCnn => PATCH,
            NetKind::Dilated | NetKind::Crpm => TILE,
        };
        spec.output_shapes(&params, (in_channels, probe, probe))
            .map_err(|e| Error::Format(format!("model layers do not match its tensors: {}", e)))?;
        Ok(Self {
            spec,
            params,
            norm,
            config,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// The same weights with every value passed through f32, as a load would see them.
    pub fn rounded(&self) -> Result<Self> {
        Self::from_bytes(&self.to_bytes()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crpm_core::nets::build_cs_cnn;
    use crpm_core::polsar::ChannelStats;

    fn sample() -> ModelFile {
        let (spec, params) = build_cs_cnn(6, 3, 4).unwrap();
        let norm = NormStats {
            channels: (0..6)
                .map(|i| {
                    (
                        format!("c{}", i),
                        ChannelStats {
                            mu_re: i as f64,
                            mu_im: 0.5,
                            sigma: 2.0,
                        },
                    )
                })
                .collect(),
        };
        ModelFile {
            spec,
            params,
            norm,
            config: Some(TrainConfig::default()),
            seed: 4,
        }
    }

    #[test]
    fn round_trip_is_f32_exact() {
        let m = sample();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        let back = ModelFile::from_bytes(&bytes).unwrap();
        assert_eq!(back.spec, m.spec);
        assert_eq!(back.config, m.config);
        assert_eq!(back.seed, 4);
        for (name, l) in &m.params.convs {
            let b = &back.params.convs[name];
            for (x, y) in l.weights.re().iter().zip(b.weights.re()) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn payload_length_matches_header() {
        let m = sample();
        let bytes = m.to_bytes().unwrap();
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let tensors: usize = slots(&m.params)
            .iter()
            .map(|s| {
                let shape: Vec<usize> = serde_json::from_value(slot_json(s, &m.params)["shape"].clone()).unwrap();
                4 + 4 * shape.len() + 8 * shape.iter().product::<usize>()
            })
            .sum();
        assert_eq!(bytes.len(), 16 + hlen + tensors);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample().to_bytes().unwrap();
        assert!(ModelFile::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ModelFile::from_bytes(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ModelFile::from_bytes(&bad).is_err());
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(ModelFile::from_bytes(&v2).is_err());
    }
}
