//! Versioned little-endian binary checkpoint.
//!
//! Layout: magic `DBCK`, u32 version, u64 seed, model tag, dataset name,
//! hyperparameters as `key=value` strings, shape, then every parameter block
//! in [`MfModel::to_flat`] order as f64. Strings are u32-length prefixed.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::mf::MfModel;
use super::train::{HyperParams, ModelKind};

const MAGIC: &[u8; 4] = b"DBCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub seed: u64,
    pub dataset: String,
    pub hp: HyperParams,
    pub model: MfModel,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        put_str(&mut out, self.kind.tag());
        put_str(&mut out, &self.dataset);
        let entries = self.hp.entries();
        out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for (k, v) in entries {
            put_str(&mut out, &format!("{k}={v}"));
        }
        let m = &self.model;
        for n in [m.num_users, m.num_items, m.dim] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        out.extend_from_slice(&m.rating_min.to_le_bytes());
        out.extend_from_slice(&m.rating_max.to_le_bytes());
        for x in m.to_flat() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let seed = r.u64()?;
        let kind: ModelKind = r.string()?.parse()?;
        let dataset = r.string()?;
        let mut hp = HyperParams::default();
        for _ in 0..r.u32()? {
            let entry = r.string()?;
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("bad hyperparameter entry `{entry}`")))?;
            hp.set(k, v)?;
        }
        let num_users = r.u64()? as usize;
        let num_items = r.u64()? as usize;
        let dim = r.u64()? as usize;
        let rating_min = r.f64()?;
        let rating_max = r.f64()?;
        let mut model = MfModel::zeros(num_users, num_items, dim, rating_min, rating_max);
        let expected = model.num_params();
        if r.remaining() != expected * 8 {
            return Err(Error::Checkpoint(format!(
                "expected {expected} parameters, found {} bytes",
                r.remaining()
            )));
        }
        let flat = (0..expected).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        model.set_flat(&flat);
        Ok(Self {
            kind,
            seed,
            dataset,
            hp,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid utf-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn sample() -> Checkpoint {
        let mut model = MfModel::zeros(3, 4, 2, 1.0, 5.0);
        let mut rng = SeededRng::new(9);
        let flat: Vec<f64> = (0..model.num_params()).map(|_| rng.normal()).collect();
        model.set_flat(&flat);
        Checkpoint {
            kind: ModelKind::Dr,
            seed: 42,
            dataset: "coat".into(),
            hp: HyperParams {
                learning_rate: 0.0123456789,
                ..Default::default()
            },
            model,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn corrupt_input_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[4] = 9;
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }
}
