//! Binary model container for motion models and end-to-end filters.
//!
//! Byte layout (all integers and float bits little-endian):
//!
//! ```text
//! magic      8 bytes      b"MOVESORT"
//! version    u32          1
//! kind       string       "motion:<arch>" or "e2e:<arch>"
//! history    u64
//! hidden     u64
//! seed       u64
//! final_loss f64 bits
//! codec      string mode; u8 standardize; 5×f64 mean; 5×f64 std
//! n_params   u64
//! param*     string name; u8 tag (1 vector, 2 matrix);
//!            u64 len | u64 rows + u64 cols; payload f64 bits (row-major)
//! ```
//!
//! Strings are a u64 byte length followed by UTF-8. Parameters appear in
//! registration order, so identical models serialize to identical bytes.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::features::{FeatureCodec, FeatureMode};
use crate::filters::{E2eArch, E2eModel};
use crate::motion::{MotionArch, MotionModel};
use crate::nn::{ParamStore, Tensor};

use super::IoError;

const MAGIC: &[u8; 8] = b"MOVESORT";
const VERSION: u32 = 1;

/// Either of the two trainable model families, as stored on disk.
#[derive(Debug, Clone)]
pub enum ModelFile {
    Motion(MotionModel),
    E2e(E2eModel),
}

impl ModelFile {
    pub fn kind_name(&self) -> String {
        match self {
            ModelFile::Motion(m) => format!("motion:{}", m.arch.name()),
            ModelFile::E2e(m) => format!("e2e:{}", m.arch.name()),
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    label: &'a str,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, IoError> {
        Err(IoError::Model(format!("{}: {}", self.label, msg.into())))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        if self.pos + n > self.buf.len() {
            return self.fail("unexpected end of file");
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, IoError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, IoError> {
        let len = self.u64()? as usize;
        if len > self.buf.len() {
            return self.fail("string length exceeds file size");
        }
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).or_else(|_| self.fail("invalid UTF-8 string"))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn write_codec(w: &mut Writer, codec: &FeatureCodec) {
    w.string(codec.mode.name());
    w.u8(codec.standardize as u8);
    for v in codec.mean {
        w.f64(v);
    }
    for v in codec.std {
        w.f64(v);
    }
}

fn read_codec(r: &mut Reader) -> Result<FeatureCodec, IoError> {
    let mode_name = r.string()?;
    let Some(mode) = FeatureMode::from_name(&mode_name) else {
        return r.fail(format!("unknown feature mode '{mode_name}'"));
    };
    let standardize = match r.u8()? {
        0 => false,
        1 => true,
        other => return r.fail(format!("bad standardize flag {other}")),
    };
    let mut codec = FeatureCodec::new(mode, standardize);
    for slot in codec.mean.iter_mut() {
        *slot = r.f64()?;
    }
    for slot in codec.std.iter_mut() {
        *slot = r.f64()?;
    }
    Ok(codec)
}

fn write_params(w: &mut Writer, params: &ParamStore) {
    w.u64(params.len() as u64);
    for (name, tensor) in params.entries() {
        w.string(name);
        match tensor {
            Tensor::Vector(v) => {
                w.u8(1);
                w.u64(v.len() as u64);
            }
            Tensor::Matrix(m) => {
                w.u8(2);
                w.u64(m.nrows() as u64);
                w.u64(m.ncols() as u64);
            }
        }
        for &v in tensor.as_slice() {
            w.f64(v);
        }
    }
}

/// Copies stored tensors into a freshly built skeleton store, verifying
/// names, shapes and completeness.
fn read_params_into(r: &mut Reader, params: &mut ParamStore) -> Result<(), IoError> {
    let count = r.u64()? as usize;
    if count != params.len() {
        return r.fail(format!("expected {} parameters, file has {count}", params.len()));
    }
    for _ in 0..count {
        let name = r.string()?;
        let tag = r.u8()?;
        let stored: Tensor = match tag {
            1 => {
                let len = r.u64()? as usize;
                let mut v = Array1::zeros(len);
                for slot in v.iter_mut() {
                    *slot = r.f64()?;
                }
                Tensor::Vector(v)
            }
            2 => {
                let rows = r.u64()? as usize;
                let cols = r.u64()? as usize;
                let mut m = Array2::zeros((rows, cols));
                for slot in m.iter_mut() {
                    *slot = r.f64()?;
                }
                Tensor::Matrix(m)
            }
            other => return r.fail(format!("bad tensor tag {other}")),
        };
        let Some(id) = params.id(&name) else {
            return r.fail(format!("unknown parameter '{name}' for this architecture"));
        };
        let target = params.tensor_mut(id);
        let same_shape = match (&stored, &*target) {
            (Tensor::Vector(a), Tensor::Vector(b)) => a.len() == b.len(),
            (Tensor::Matrix(a), Tensor::Matrix(b)) => a.dim() == b.dim(),
            _ => false,
        };
        if !same_shape {
            return r.fail(format!("parameter '{name}' has a mismatched shape"));
        }
        *target = stored;
    }
    Ok(())
}

pub fn model_to_bytes(model: &ModelFile) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.string(&model.kind_name());
    let (history, hidden, seed, final_loss, codec, params) = match model {
        ModelFile::Motion(m) => {
            (m.history_len, m.hidden_dim, m.seed, m.final_loss, &m.codec, &m.params)
        }
        ModelFile::E2e(m) => {
            (m.history_len, m.hidden_dim, m.seed, m.final_loss, &m.codec, &m.params)
        }
    };
    w.u64(history as u64);
    w.u64(hidden as u64);
    w.u64(seed);
    w.f64(final_loss);
    write_codec(&mut w, codec);
    write_params(&mut w, params);
    w.buf
}

pub fn model_from_bytes(bytes: &[u8], label: &str) -> Result<ModelFile, IoError> {
    let mut r = Reader { buf: bytes, pos: 0, label };
    if r.take(8)? != MAGIC {
        return r.fail("not a model file (bad magic)");
    }
    let version = r.u32()?;
    if version != VERSION {
        return r.fail(format!("unsupported version {version}"));
    }
    let kind = r.string()?;
    let history = r.u64()? as usize;
    let hidden = r.u64()? as usize;
    let seed = r.u64()?;
    let final_loss = r.f64()?;
    let codec = read_codec(&mut r)?;

    let mut model = match kind.split_once(':') {
        Some(("motion", arch_name)) => {
            let Some(arch) = MotionArch::from_name(arch_name) else {
                return r.fail(format!("unknown motion architecture '{arch_name}'"));
            };
            ModelFile::Motion(MotionModel::new(arch, codec, history, hidden, seed))
        }
        Some(("e2e", arch_name)) => {
            let Some(arch) = E2eArch::from_name(arch_name) else {
                return r.fail(format!("unknown end-to-end architecture '{arch_name}'"));
            };
            ModelFile::E2e(E2eModel::new(arch, codec, history, hidden, seed))
        }
        _ => return r.fail(format!("unknown model kind '{kind}'")),
    };
    match &mut model {
        ModelFile::Motion(m) => {
            read_params_into(&mut r, &mut m.params)?;
            m.final_loss = final_loss;
        }
        ModelFile::E2e(m) => {
            read_params_into(&mut r, &mut m.params)?;
            m.final_loss = final_loss;
        }
    }
    if !r.done() {
        return r.fail("trailing bytes after the parameter table");
    }
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &ModelFile) -> Result<(), IoError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile, IoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    model_from_bytes(&bytes, &path.display().to_string())
}
