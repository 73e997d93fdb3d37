//! Binary checkpoints.
//!
//! Layout: 8-byte magic, `u32` version, `u64` header length, a JSON header,
//! the parameters as little-endian `f64`, optionally the two Adam moment
//! vectors, and a trailing CRC-32 of everything before it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::field::{FieldConfig, RadianceFieldParams};

const MAGIC: &[u8; 8] = b"HDRFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: RadianceFieldParams,
    pub train_config: TrainConfig,
    /// Completed training iterations.
    pub iteration: u64,
    pub optimizer: Option<Adam>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    field: FieldConfig,
    train: TrainConfig,
    iteration: u64,
    param_count: usize,
    adam_steps: Option<Vec<u64>>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            field: self.params.config().clone(),
            train: self.train_config.clone(),
            iteration: self.iteration,
            param_count: self.params.len(),
            adam_steps: self.optimizer.as_ref().map(|a| a.steps.clone()),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let n = self.params.len();
        let arrays = if self.optimizer.is_some() { 3 } else { 1 };
        let mut out = Vec::with_capacity(24 + header.len() + 8 * n * arrays + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let mut push = |v: &[f64]| {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        };
        push(self.params.values());
        if let Some(a) = &self.optimizer {
            push(&a.m);
            push(&a.v);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::format(path, reason);
        if bytes.len() < 24 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body).to_le_bytes() != crc {
            return Err(bad("checksum mismatch"));
        }
        let hlen = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        let rest = body.get(20..).ok_or_else(|| bad("truncated header"))?;
        if rest.len() < hlen {
            return Err(bad("truncated header"));
        }
        let (hbytes, data) = rest.split_at(hlen);
        let header: Header = serde_json::from_slice(hbytes).map_err(|e| Error::format(path, e))?;
        let n = header.param_count;
        let arrays = if header.adam_steps.is_some() { 3 } else { 1 };
        if data.len() != 8 * n * arrays {
            return Err(bad("payload size does not match header"));
        }
        let mut floats = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = || (&mut floats).take(n).collect::<Vec<f64>>();
        let values = take();
        let params = RadianceFieldParams::from_values(header.field, values)?;
        let optimizer = header.adam_steps.map(|steps| Adam {
            config: header.train.adam,
            m: take(),
            v: take(),
            steps,
        });
        Ok(Checkpoint {
            params,
            train_config: header.train,
            iteration: header.iteration,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::tests::tiny_config;

    fn sample() -> Checkpoint {
        let params = RadianceFieldParams::init(tiny_config(), 5).unwrap();
        let n = params.len();
        let mut adam = Adam::new(Default::default(), n, 4);
        adam.m[3] = 0.25;
        adam.v[7] = f64::MIN_POSITIVE;
        adam.steps = vec![3, 3, 3, 0];
        Checkpoint {
            params,
            train_config: TrainConfig::default(),
            iteration: 3,
            optimizer: Some(adam),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ckpt");
        let c = sample();
        c.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), c.to_bytes());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.params.values()), bits(c.params.values()));
    }

    #[test]
    fn corruption_is_detected() {
        let path = Path::new("x.ckpt");
        let mut bytes = sample().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(Checkpoint::from_bytes(&bytes, path).is_err());
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 9], path).is_err());
        assert!(Checkpoint::from_bytes(b"garbage", path).is_err());
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut bytes = sample().to_bytes();
        bytes[8] = 9;
        match Checkpoint::from_bytes(&bytes, Path::new("x")) {
            Err(Error::VersionMismatch {
                found: 9,
                expected: 1,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
