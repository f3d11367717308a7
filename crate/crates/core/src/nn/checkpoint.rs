//! Binary checkpoint format (little-endian):
//!
//! ```text
//! "SPNC"            4 bytes magic
//! version           u32 (= 1)
//! entry count       u32
//! per entry:
//!   name length     u16, then UTF-8 name
//!   rank            u8, then each dim as u32
//!   data            raw f32 values, row-major
//! trailer           u64 = number of bytes preceding it
//! ```
//!
//! Optimizer state, when included, is stored as extra entries named
//! `<param>#adam.m`, `<param>#adam.v` and `<param>#adam.step`.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::ParameterStore;
use crate::adam::AdamState;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"SPNC";
pub const VERSION: u32 = 1;

const ADAM_M: &str = "#adam.m";
const ADAM_V: &str = "#adam.v";
const ADAM_STEP: &str = "#adam.step";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    CorruptMagic,
    #[error("unsupported checkpoint version {found} (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checkpoint truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// Serialises parameter values only.
pub fn save_checkpoint(store: &ParameterStore, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    write_atomic(path.as_ref(), &encode(store, false))
}

/// Serialises parameter values together with their Adam moments and step counters.
pub fn save_checkpoint_with_optimizer(
    store: &ParameterStore,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    write_atomic(path.as_ref(), &encode(store, true))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParameterStore, CheckpointError> {
    decode(&fs::read(path)?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CheckpointError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn put_entry(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    let name_bytes = name.as_bytes();
    out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
    out.extend_from_slice(name_bytes);
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.reserve(t.len() * 4);
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Encodes a step counter exactly in two f32 lanes (24 + 40 bits).
fn step_tensor(step: u64) -> Tensor {
    let lo = (step & 0xFF_FFFF) as f32;
    let hi = (step >> 24) as f32;
    Tensor::from_vec(&[2], vec![lo, hi]).expect("two lanes")
}

pub fn encode(store: &ParameterStore, include_optimizer: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + store.scalar_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let per = if include_optimizer { 4 } else { 1 };
    out.extend_from_slice(&((store.len() * per) as u32).to_le_bytes());
    for (name, t) in store.iter() {
        put_entry(&mut out, name, t);
        if include_optimizer {
            let s = store.adam_state(store.id_of(name).expect("own name"));
            put_entry(&mut out, &format!("{name}{ADAM_M}"), &s.first_moment);
            put_entry(&mut out, &format!("{name}{ADAM_V}"), &s.second_moment);
            put_entry(&mut out, &format!("{name}{ADAM_STEP}"), &step_tensor(s.step));
        }
    }
    let len = out.len() as u64;
    out.extend_from_slice(&len.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(CheckpointError::Truncated { offset: self.bytes.len() });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParameterStore, CheckpointError> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(CheckpointError::CorruptMagic);
    }
    let mut r = Reader { bytes, pos: 0 };
    r.take(4)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CheckpointError::Malformed("entry name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or(CheckpointError::Truncated { offset: bytes.len() })?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| CheckpointError::Malformed(format!("{name}: {e}")))?;
        entries.push((name, t));
    }
    let body = r.pos as u64;
    let trailer = r.u64()?;
    if trailer != body {
        return Err(CheckpointError::Truncated { offset: body as usize });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    assemble(entries)
}

fn assemble(entries: Vec<(String, Tensor)>) -> Result<ParameterStore, CheckpointError> {
    let mut store = ParameterStore::new();
    let mut optimizer = Vec::new();
    for (name, t) in entries {
        if name.contains('#') {
            optimizer.push((name, t));
        } else {
            store
                .register(name, t)
                .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        }
    }
    let mut states: Vec<Option<AdamState>> = vec![None; store.len()];
    for (name, t) in optimizer {
        let (param, field) = name.split_at(name.find('#').unwrap());
        let id = store
            .id_of(param)
            .ok_or_else(|| CheckpointError::Malformed(format!("optimizer state for unknown {param}")))?;
        let shape = store.get(id).shape().to_vec();
        let st = states[id.index()].get_or_insert_with(|| AdamState::new(&shape));
        match field {
            ADAM_M => st.first_moment = t,
            ADAM_V => st.second_moment = t,
            ADAM_STEP => {
                let d = t.data();
                if d.len() != 2 {
                    return Err(CheckpointError::Malformed(format!("{name}: bad step encoding")));
                }
                st.step = d[0] as u64 | ((d[1] as u64) << 24);
            }
            other => return Err(CheckpointError::Malformed(format!("unknown entry suffix {other}"))),
        }
    }
    let names: Vec<String> = store.names().map(str::to_owned).collect();
    for (name, st) in names.iter().zip(states) {
        if let Some(st) = st {
            let id = store.id_of(name).expect("registered above");
            store
                .set_adam_state(id, st)
                .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        }
    }
    Ok(store)
}
