//! Versioned binary checkpoint: magic, format version, run config as JSON,
//! then every named parameter with its shape and f32 little-endian values.

use std::fs;
use std::path::Path;

use uml_autograd::{ParamStore, Tensor};

use super::config::RunConfig;
use crate::error::{Result, UmlError};
use crate::model::Model;

pub const MAGIC: &[u8; 8] = b"UMLCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_checkpoint(cfg: &RunConfig, model: &Model<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    let json = cfg.to_json();
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    put_u32(&mut out, model.params().len() as u32);
    for (_, p) in model.params().iter() {
        put_u32(&mut out, p.name.len() as u32);
        out.extend_from_slice(p.name.as_bytes());
        put_u32(&mut out, p.value.shape().len() as u32);
        for &d in p.value.shape() {
            put_u32(&mut out, d as u32);
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.bytes.len() - self.pos < n {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parse a checkpoint and rebuild the model it describes. Every tensor must
/// match the name and shape the stored config implies.
pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<(RunConfig, Model<f32>), String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let len = r.u64()? as usize;
    let json = std::str::from_utf8(r.take(len)?).map_err(|e| e.to_string())?;
    let cfg: RunConfig = serde_json::from_str(json).map_err(|e| format!("config: {e}"))?;
    cfg.validate().map_err(|e| e.to_string())?;
    let mut model = Model::<f32>::new(cfg.model.clone()).map_err(|e| e.to_string())?;
    let count = r.u32()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|e| e.to_string())?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * 4)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let decay = model.params().find(&name).map(|id| model.params().get(id).decay).unwrap_or(true);
        store.add(name, Tensor::from_vec(&shape, data), decay);
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    model.load_params(store).map_err(|e| e.to_string())?;
    Ok((cfg, model))
}

pub fn save_checkpoint(path: &Path, cfg: &RunConfig, model: &Model<f32>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| UmlError::io(dir, e))?;
    }
    fs::write(path, encode_checkpoint(cfg, model)).map_err(|e| UmlError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(RunConfig, Model<f32>)> {
    let bytes = fs::read(path).map_err(|e| UmlError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|reason| UmlError::Checkpoint { path: path.to_path_buf(), reason })
}
