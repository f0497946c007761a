//! Binary checkpoint format.
//!
//! ```text
//! "DFTK" | version u32 | meta_len u32 | meta JSON | step u64 | rng digest [32]
//! | n_tensors u32 | n × (name_len u16 | name | ndim u8 | dims u32… | f32 data)
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Denoiser, ModelConfig, Params};
use super::train::TrainConfig;
use super::FlowError;
use crate::render::RenderSpec;
use crate::types::{Level, TaskKind};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DFTK";
pub const CHECKPOINT_VERSION: u32 = 1;
const MAX_META: usize = 1 << 20;
const MAX_TENSORS: usize = 1 << 16;
const MAX_NDIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub render: RenderSpec,
    pub train: TrainConfig,
    pub kind: TaskKind,
    pub level: Level,
}

/// Raw and averaged weights plus optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserCheckpoint {
    pub meta: CheckpointMeta,
    pub step: u64,
    pub rng_digest: [u8; 32],
    pub params: Params<f32>,
    pub ema: Params<f32>,
    pub adam_m: Params<f32>,
    pub adam_v: Params<f32>,
}

const GROUPS: [&str; 4] = ["param", "ema", "adam_m", "adam_v"];

impl DenoiserCheckpoint {
    /// The averaged weights, which sampling uses.
    pub fn ema_model(&self) -> Result<Denoiser<f32>, FlowError> {
        Denoiser::from_params(self.meta.model, self.ema.clone())
    }

    pub fn raw_model(&self) -> Result<Denoiser<f32>, FlowError> {
        Denoiser::from_params(self.meta.model, self.params.clone())
    }

    /// Short identifier: hex prefix of the SHA-256 of the encoded bytes.
    pub fn id(&self) -> String {
        use sha2::{Digest, Sha256};
        let d = Sha256::digest(self.to_bytes());
        d[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let meta = serde_json::to_vec(&self.meta).expect("meta serializes");
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.rng_digest);
        let groups = [&self.params, &self.ema, &self.adam_m, &self.adam_v];
        let total: usize = groups.iter().map(|g| g.names.len()).sum();
        out.extend_from_slice(&(total as u32).to_le_bytes());
        for (prefix, g) in GROUPS.iter().zip(groups) {
            for ((name, shape), data) in g.names.iter().zip(&g.shapes).zip(&g.data) {
                let full = format!("{prefix}/{name}");
                out.extend_from_slice(&(full.len() as u16).to_le_bytes());
                out.extend_from_slice(full.as_bytes());
                out.push(shape.len() as u8);
                for &d in shape {
                    out.extend_from_slice(&(d as u32).to_le_bytes());
                }
                for v in data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FlowError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(FlowError::Checkpoint("missing DFTK magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(FlowError::Version(version));
        }
        let meta_len = r.u32()? as usize;
        if meta_len > MAX_META {
            return Err(FlowError::Checkpoint("config blob too large".into()));
        }
        let meta: CheckpointMeta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| FlowError::Checkpoint(format!("config: {e}")))?;
        meta.model.validate()?;
        let step = r.u64()?;
        let rng_digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let n = r.u32()? as usize;
        if n > MAX_TENSORS {
            return Err(FlowError::Checkpoint("too many tensors".into()));
        }
        let mut groups: Vec<Params<f32>> =
            (0..4).map(|_| Params { names: Vec::new(), shapes: Vec::new(), data: Vec::new() }).collect();
        for _ in 0..n {
            let name_len = r.u16()? as usize;
            let full = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| FlowError::Checkpoint("tensor name is not UTF-8".into()))?;
            let (prefix, name) = full
                .split_once('/')
                .ok_or_else(|| FlowError::Checkpoint(format!("tensor name {full:?} lacks a group")))?;
            let g = GROUPS
                .iter()
                .position(|&p| p == prefix)
                .ok_or_else(|| FlowError::Checkpoint(format!("unknown tensor group {prefix:?}")))?;
            let ndim = r.take(1)?[0] as usize;
            if ndim == 0 || ndim > MAX_NDIM {
                return Err(FlowError::Checkpoint(format!("tensor {full:?} has {ndim} dims")));
            }
            let shape: Vec<usize> = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_, _>>()?;
            let len = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&l| l.checked_mul(4).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| FlowError::Checkpoint(format!("tensor {full:?} overruns the file")))?;
            let data = r.take(len * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            groups[g].names.push(name.to_string());
            groups[g].shapes.push(shape);
            groups[g].data.push(data);
        }
        if r.remaining() != 0 {
            return Err(FlowError::Checkpoint("trailing bytes".into()));
        }
        let adam_v = groups.pop().unwrap();
        let adam_m = groups.pop().unwrap();
        let ema = groups.pop().unwrap();
        let params = groups.pop().unwrap();
        let ck = DenoiserCheckpoint { meta, step, rng_digest, params, ema, adam_m, adam_v };
        // Every group must match the architecture.
        for g in [&ck.params, &ck.ema, &ck.adam_m, &ck.adam_v] {
            Denoiser::from_params(ck.meta.model, g.clone())?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), FlowError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FlowError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FlowError> {
        if self.remaining() < n {
            return Err(FlowError::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u16(&mut self) -> Result<u16, FlowError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FlowError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FlowError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Trainer;

    fn small_checkpoint() -> DenoiserCheckpoint {
        let model = ModelConfig { channels: 3, height: 8, width: 8, patch: 4, dim: 8, depth: 1, heads: 2, mlp_ratio: 1, time_dim: 4, prediction: Default::default() };
        let meta = CheckpointMeta {
            model,
            render: RenderSpec::default(),
            train: TrainConfig::default(),
            kind: TaskKind::VspFrozenLake,
            level: Level::GridSize(3),
        };
        Trainer::new(meta).unwrap().checkpoint()
    }

    #[test]
    fn save_load_identity() {
        let ck = small_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.dftk");
        ck.save(&p).unwrap();
        assert_eq!(DenoiserCheckpoint::load(&p).unwrap(), ck);
        assert_eq!(&std::fs::read(&p).unwrap()[..4], b"DFTK");
    }

    #[test]
    fn version_gate_and_truncation() {
        let mut bytes = small_checkpoint().to_bytes();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(DenoiserCheckpoint::from_bytes(&bytes[..cut]).is_err());
        }
        bytes[4] = 9;
        assert!(matches!(DenoiserCheckpoint::from_bytes(&bytes), Err(FlowError::Version(9))));
    }
}
