//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! "RDN1" | u32 format version | u32 feature_dim | u32 hidden | u32 num_blocks
//! | u32 refine_k | u8 activation | u8 pooling | u8 refine costs | u32 tensor count
//! | per tensor: u16 name length, name, u8 ndim, u32 dims..., f64 values...
//! ```

use super::params::{Activation, ModelConfig, ModelParams, RefineCosts, RefinePooling};
use super::NetError;
use crate::warmstart::FeatureDim;
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RDN1";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(p: &ModelParams, mut w: W) -> Result<(), NetError> {
    let c = &p.config;
    w.write_all(CHECKPOINT_MAGIC)?;
    for x in [
        CHECKPOINT_VERSION,
        c.input_dim() as u32,
        c.hidden as u32,
        c.num_blocks as u32,
        c.refine_k as u32,
    ] {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&[c.activation.tag(), c.pooling.tag(), c.refine_costs.tag()])?;
    let tensors = p.tensors();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, shape, values) in tensors {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[shape.len() as u8])?;
        for d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(p: &ModelParams, path: impl AsRef<Path>) -> Result<(), NetError> {
    let mut buf = Vec::new();
    write_checkpoint(p, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], NetError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| {
                NetError::CorruptCheckpoint(format!("truncated at byte {}", self.pos))
            })?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NetError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams, NetError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut cur = Cursor {
        data: &data,
        pos: 0,
    };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(NetError::CorruptCheckpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NetError::VersionMismatch(format!(
            "format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let input_dim = cur.u32()? as usize;
    let feature_dim = FeatureDim::from_width(input_dim).ok_or_else(|| {
        NetError::CorruptCheckpoint(format!("unsupported feature width {input_dim}"))
    })?;
    let hidden = cur.u32()? as usize;
    let num_blocks = cur.u32()? as usize;
    let refine_k = cur.u32()? as usize;
    let activation = Activation::from_tag(cur.u8()?)
        .ok_or_else(|| NetError::CorruptCheckpoint("unknown activation tag".into()))?;
    let pooling = RefinePooling::from_tag(cur.u8()?)
        .ok_or_else(|| NetError::CorruptCheckpoint("unknown pooling tag".into()))?;
    let refine_costs = RefineCosts::from_tag(cur.u8()?)
        .ok_or_else(|| NetError::CorruptCheckpoint("unknown refine cost tag".into()))?;
    if hidden == 0
        || refine_k == 0
        || hidden > 1 << 16
        || num_blocks > 1 << 10
        || refine_k > 1 << 16
    {
        return Err(NetError::CorruptCheckpoint("implausible header".into()));
    }
    let config = ModelConfig {
        feature_dim,
        hidden,
        num_blocks,
        refine_k,
        activation,
        pooling,
        refine_costs,
    };
    let mut params = ModelParams::zeros(config);
    let expected: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|(name, shape, _)| (name, shape))
        .collect();
    let count = cur.u32()? as usize;
    if count != expected.len() {
        return Err(NetError::CorruptCheckpoint(format!(
            "{count} tensors, expected {}",
            expected.len()
        )));
    }
    let mut slots = params.tensors_mut();
    for ((name, shape), slot) in expected.iter().zip(slots.iter_mut()) {
        let len = cur.u16()? as usize;
        let got = cur.take(len)?;
        if got != name.as_bytes() {
            return Err(NetError::CorruptCheckpoint(format!(
                "expected tensor {name}, found {}",
                String::from_utf8_lossy(got)
            )));
        }
        let ndim = cur.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(cur.u32()? as usize);
        }
        if &dims != shape {
            return Err(NetError::CorruptCheckpoint(format!(
                "tensor {name} has shape {dims:?}, expected {shape:?}"
            )));
        }
        for x in slot.iter_mut() {
            *x = cur.f64()?;
        }
    }
    if cur.pos != data.len() {
        return Err(NetError::CorruptCheckpoint("trailing bytes".into()));
    }
    Ok(params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams, NetError> {
    read_checkpoint(std::fs::File::open(path)?)
}

/// Loads a checkpoint and rejects it unless it was trained on `feature_dim`.
pub fn load_checkpoint_for(
    path: impl AsRef<Path>,
    feature_dim: FeatureDim,
) -> Result<ModelParams, NetError> {
    let p = load_checkpoint(path)?;
    if p.config.feature_dim != feature_dim {
        return Err(NetError::VersionMismatch(format!(
            "checkpoint uses d = {}, pipeline expects d = {}",
            p.config.input_dim(),
            feature_dim.width()
        )));
    }
    Ok(p)
}
