//! Versioned binary checkpoint files.
//!
//! Layout: magic `MOTX`, format version, model-kind tag, a JSON
//! hyperparameter record, then named tensors (name, dtype, shape,
//! little-endian values). Loading validates every declared shape.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ndarray::{NdArray, Real};
use super::params::ParamSet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MOTX";
const FORMAT_VERSION: u32 = 1;

#[cfg(not(feature = "f32"))]
const DTYPE: u8 = 0; // f64
#[cfg(feature = "f32")]
const DTYPE: u8 = 1; // f32

pub struct Checkpoint {
    pub kind: String,
    pub hyper: serde_json::Value,
    pub tensors: Vec<(String, NdArray)>,
}

impl Checkpoint {
    pub fn new(kind: &str, hyper: serde_json::Value) -> Self {
        Checkpoint { kind: kind.to_string(), hyper, tensors: Vec::new() }
    }

    pub fn push(&mut self, name: &str, tensor: NdArray) {
        self.tensors.push((name.to_string(), tensor));
    }

    pub fn push_params(&mut self, prefix: &str, params: &ParamSet) {
        for (_, p) in params.iter() {
            self.tensors.push((format!("{prefix}{}", p.name), p.value.clone()));
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&NdArray> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }

    /// Copy stored tensors into an already-shaped parameter set,
    /// validating every shape.
    pub fn load_params(&self, prefix: &str, params: &mut ParamSet) -> Result<()> {
        for p in params.iter_mut() {
            let name = format!("{prefix}{}", p.name);
            let t = self
                .tensors
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))?;
            if t.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name:?}: declared shape {:?} does not match expected {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        write_str(&mut w, &self.kind)?;
        write_str(&mut w, &serde_json::to_string(&self.hyper)?)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            write_str(&mut w, name)?;
            w.write_all(&[DTYPE])?;
            w.write_all(&[t.shape().len() as u8])?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "{}: bad magic {magic:?}",
                path.display()
            )));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let kind = read_str(&mut r)?;
        let hyper: serde_json::Value = serde_json::from_str(&read_str(&mut r)?)?;
        let n = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let name = read_str(&mut r)?;
            let mut dtype = [0u8; 1];
            r.read_exact(&mut dtype)?;
            if dtype[0] != DTYPE {
                return Err(Error::Checkpoint(format!(
                    "tensor {name:?}: dtype tag {} does not match build dtype {DTYPE}",
                    dtype[0]
                )));
            }
            let mut ndim = [0u8; 1];
            r.read_exact(&mut ndim)?;
            let mut shape = Vec::with_capacity(ndim[0] as usize);
            for _ in 0..ndim[0] {
                shape.push(read_u32(&mut r)? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut data = Vec::with_capacity(numel);
            let mut buf = [0u8; std::mem::size_of::<Real>()];
            for _ in 0..numel {
                r.read_exact(&mut buf)?;
                data.push(Real::from_le_bytes(buf));
            }
            tensors.push((name, NdArray::new(shape, data)));
        }
        Ok(Checkpoint { kind, hyper, tensors })
    }

    /// Expect a specific model kind, otherwise explain what was found.
    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "expected a {kind:?} checkpoint, found {:?}",
                self.kind
            )));
        }
        Ok(())
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 64 * 1024 * 1024 {
        return Err(Error::Checkpoint(format!("string length {len} implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(format!("bad utf8: {e}")))
}
