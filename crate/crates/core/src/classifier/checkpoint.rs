//! Versioned binary model file.
//!
//! Layout (little endian): magic `MSTM`, u32 version, u64 seed, u32 length +
//! UTF-8 feature config name, u32 length + UTF-8 sidecar path, 2 x f64 class
//! weights, u32 layer count + u32 sizes, f32 parameters, u32 length + JSON
//! training config.

use std::path::Path;

use super::mlp::Mlp;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MSTM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Mlp,
    pub feature_config: FeatureConfig,
    pub seed: u64,
    /// Normalization sidecar, relative to the checkpoint's directory.
    pub sidecar: String,
    pub class_weights: [f64; 2],
    pub train_config: TrainConfig,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::MalformedHeader("checkpoint is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
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
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::MalformedHeader("checkpoint string is not UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        put_str(&mut out, self.feature_config.name());
        put_str(&mut out, &self.sidecar);
        for w in self.class_weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(self.model.sizes.len() as u32).to_le_bytes());
        for &s in &self.model.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for &p in &self.model.params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        put_str(&mut out, &serde_json::to_string(&self.train_config)?);
        Ok(out)
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::MalformedHeader("not a model checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let seed = r.u64()?;
        let name = r.string()?;
        let feature_config = FeatureConfig::parse(&name)
            .ok_or_else(|| Error::MalformedHeader(format!("unknown feature config {name:?} in checkpoint")))?;
        let sidecar = r.string()?;
        let class_weights = [r.f64()?, r.f64()?];
        let n_layers = r.u32()? as usize;
        if n_layers > 64 {
            return Err(Error::MalformedHeader(format!("implausible layer count {n_layers}")));
        }
        let sizes = (0..n_layers).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let mut model = Mlp::zeros(&sizes).map_err(|_| Error::MalformedHeader(format!("bad layer sizes {sizes:?}")))?;
        let raw = r.take(model.params.len() * 4)?;
        for (p, b) in model.params.iter_mut().zip(raw.chunks_exact(4)) {
            *p = f32::from_le_bytes(b.try_into().unwrap()) as f64;
        }
        let train_config: TrainConfig = serde_json::from_str(&r.string()?)?;
        if r.pos != buf.len() {
            return Err(Error::MalformedHeader("trailing bytes after checkpoint".into()));
        }
        Ok(Checkpoint { model, feature_config, seed, sidecar, class_weights, train_config })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
