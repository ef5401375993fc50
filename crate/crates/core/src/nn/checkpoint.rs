//! `.apaw` checkpoint format, little-endian:
//!
//! ```text
//! "APAW" | version u32 | layer count u32
//! per layer: k u32 | in_ch u32 | out_ch u32 | relu u32 | weights f32… | bias f32…
//! optional: "META" | byte length u32 | UTF-8 `key=value` lines
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::conv::ConvLayer;
use crate::nn::network::{Network, NetworkDef};

pub const CKPT_MAGIC: &[u8; 4] = b"APAW";
pub const CKPT_VERSION: u32 = 1;
const META_MAGIC: &[u8; 4] = b"META";

pub type Metadata = BTreeMap<String, String>;

/// Layers plus the free-form metadata block.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub layers: Vec<ConvLayer<f32>>,
    pub meta: Metadata,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CKPT_MAGIC);
        buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            for v in [l.kernel, l.in_ch, l.out_ch, l.relu as usize] {
                buf.extend_from_slice(&(v as u32).to_le_bytes());
            }
            for x in l.weights.iter().chain(&l.bias) {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        if !self.meta.is_empty() {
            let text: String = self
                .meta
                .iter()
                .map(|(k, v)| format!("{k}={v}\n"))
                .collect();
            buf.extend_from_slice(META_MAGIC);
            buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
            buf.extend_from_slice(text.as_bytes());
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CKPT_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CKPT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let kernel = r.u32()? as usize;
            let in_ch = r.u32()? as usize;
            let out_ch = r.u32()? as usize;
            let relu = match r.u32()? {
                0 => false,
                1 => true,
                other => return Err(Error::Format(format!("bad relu flag {other}"))),
            };
            let weights = r.f32s(out_ch * in_ch * kernel * kernel)?;
            let bias = r.f32s(out_ch)?;
            let layer = ConvLayer {
                in_ch,
                out_ch,
                kernel,
                relu,
                weights,
                bias,
            };
            layer
                .validate()
                .map_err(|e| Error::Format(format!("invalid layer: {e}")))?;
            layers.push(layer);
        }
        let mut meta = Metadata::new();
        if r.pos < bytes.len() {
            if r.take(4)? != META_MAGIC {
                return Err(Error::Format("trailing bytes after layers".into()));
            }
            let len = r.u32()? as usize;
            let text = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
            for line in text.lines().filter(|l| !l.is_empty()) {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("bad metadata line {line:?}")))?;
                meta.insert(k.to_string(), v.to_string());
            }
            if r.pos != bytes.len() {
                return Err(Error::Format("trailing bytes after metadata".into()));
            }
        }
        Ok(Checkpoint { layers, meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "truncated checkpoint: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::Format("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn save_checkpoint(net: &NetworkDef, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint {
        layers: net.layers.clone(),
        meta: Metadata::new(),
    }
    .save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NetworkDef> {
    Network::new(Checkpoint::load(path)?.layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::xavier_layer;
    use crate::nn::tensor::Tensor4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> NetworkDef {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut l1 = xavier_layer(2, 4, 5, true, &mut rng);
        l1.bias = vec![0.1, -0.2, 0.3, 1e-7];
        Network::new(vec![l1, xavier_layer(4, 1, 1, false, &mut rng)]).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.apaw");
        let n = net();
        save_checkpoint(&n, &p).unwrap();
        let back = load_checkpoint(&p).unwrap();
        assert_eq!(back, n);
        let x = Tensor4::from_vec(
            1,
            2,
            6,
            6,
            (0..72).map(|i| (i as f32 * 0.1).sin()).collect(),
        )
        .unwrap();
        assert_eq!(n.infer(&x).unwrap(), back.infer(&x).unwrap());
    }

    #[test]
    fn metadata_round_trip() {
        let mut meta = Metadata::new();
        meta.insert("sigma_255".into(), "20".into());
        meta.insert("role".into(), "syn".into());
        let c = Checkpoint {
            layers: net().layers,
            meta,
        };
        assert_eq!(Checkpoint::decode(&c.encode()).unwrap(), c);
    }

    #[test]
    fn truncated_and_bad_magic() {
        let bytes = Checkpoint {
            layers: net().layers,
            meta: Metadata::new(),
        }
        .encode();
        for cut in [3, 11, 40, bytes.len() - 1] {
            assert!(
                matches!(Checkpoint::decode(&bytes[..cut]), Err(Error::Format(_))),
                "cut {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        match Checkpoint::decode(&bad) {
            Err(Error::Format(m)) => assert_eq!(m, "bad magic"),
            other => panic!("{other:?}"),
        }
    }
}
