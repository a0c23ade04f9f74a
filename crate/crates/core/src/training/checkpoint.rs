//! Binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SSAPCKPT"  u32 version
//! u32 header length, JSON header (config, vocabulary, labels, epoch, dev SF1)
//! u32 block count, then per block: u32 name length, name, u32 rank, u64 dims...
//! per block: f32 values
//! u64 FNV-1a of every preceding byte
//! ```

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::num::Scalar;
use crate::scoring::{Model, ModelConfig, ParamStore, Stage, Vocab};

use super::TrainError;

pub const MAGIC: &[u8; 8] = b"SSAPCKPT";
pub const VERSION: u32 = 1;

/// JSON header of a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub vocab: Vec<String>,
    pub expression_labels: Vec<String>,
    pub role_labels: Vec<String>,
    pub epoch: Option<usize>,
    pub dev_sf1: Option<f64>,
}

fn bad(msg: impl Into<String>) -> TrainError {
    TrainError::Checkpoint(msg.into())
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Serializes parameters (as f32) together with the information needed to
/// rebuild the model.
pub fn to_bytes<T: Scalar>(model: &Model<T>, epoch: Option<usize>, dev_sf1: Option<f64>) -> Result<Vec<u8>, TrainError> {
    let label_names = |s| model.label_set(s).labels().iter().map(|l| l.name().to_string()).collect();
    let header = CheckpointHeader {
        config: model.config().clone(),
        vocab: model.vocab().words().to_vec(),
        expression_labels: label_names(Stage::Expression),
        role_labels: label_names(Stage::Role),
        epoch,
        dev_sf1,
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let blocks = model.params().blocks();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for b in blocks {
        out.extend_from_slice(&(b.name.len() as u32).to_le_bytes());
        out.extend_from_slice(b.name.as_bytes());
        out.extend_from_slice(&(b.shape.len() as u32).to_le_bytes());
        for &d in &b.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for b in blocks {
        for &x in &b.data {
            out.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], TrainError> {
        if self.buf.len() - self.pos < k {
            return Err(bad(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, TrainError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses and validates a checkpoint image.
pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<(Model<T>, CheckpointHeader), TrainError> {
    if bytes.len() < MAGIC.len() + 4 + 8 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if checksum(body) != stored {
        return Err(bad("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let hlen = r.u32()? as usize;
    let header: CheckpointHeader = serde_json::from_slice(r.take(hlen)?).map_err(|e| bad(format!("header: {e}")))?;
    let count = r.u32()? as usize;
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = r.u32()? as usize;
        let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|_| bad("block name is not UTF-8"))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        dims.push((name, shape));
    }
    let mut params = ParamStore::<T>::new();
    for (name, shape) in dims {
        let id = params.add_zeros(&name, &shape);
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(4).ok_or_else(|| bad("block too large"))?)?;
        for (dst, c) in params.get_mut(id).iter_mut().zip(raw.chunks_exact(4)) {
            *dst = T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64);
        }
    }
    if r.pos != body.len() {
        return Err(bad(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let vocab = Vocab::from_words(header.vocab.clone());
    let model = Model::from_parts(header.config.clone(), vocab, params).map_err(|e| bad(e.to_string()))?;
    Ok((model, header))
}

pub fn save<T: Scalar>(path: &Path, model: &Model<T>, epoch: Option<usize>, dev_sf1: Option<f64>) -> Result<(), TrainError> {
    let bytes = to_bytes(model, epoch, dev_sf1)?;
    fs::write(path, bytes).map_err(|e| TrainError::io(path, e))
}

pub fn load<T: Scalar>(path: &Path) -> Result<(Model<T>, CheckpointHeader), TrainError> {
    let bytes = fs::read(path).map_err(|e| TrainError::io(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        TrainError::Checkpoint(m) => TrainError::Checkpoint(format!("{}: {m}", path.display())),
        e => e,
    })
}
