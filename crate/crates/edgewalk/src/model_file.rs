//! Binary MLP file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic     8 bytes  "EDGEWALK"
//! version   u32      1
//! layers    u32      L
//! epochs    u32      epochs trained
//! seed      u64      initialization seed
//! L times:
//!   inputs  u32
//!   outputs u32
//!   weights outputs·inputs f64, row-major
//!   bias    outputs f64
//! ```

use std::io::{self, Read, Write};

use edgewalk_core::models::{Dense, MlpModel, ModelError};

pub const MAGIC: &[u8; 8] = b"EDGEWALK";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a model file")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file ends early")]
    Truncated,
    #[error("unexpected bytes after the last layer")]
    TrailingBytes,
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    out.extend_from_slice(&model.epochs_trained.to_le_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.inputs as u32).to_le_bytes());
        out.extend_from_slice(&(layer.outputs as u32).to_le_bytes());
        for v in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        if self.0.len() < n {
            return Err(ModelFileError::Truncated);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelFileError> {
        let bytes = self.take(n.checked_mul(8).ok_or(ModelFileError::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel, ModelFileError> {
    let mut cur = Cursor(bytes);
    if cur
        .take(MAGIC.len())
        .map_err(|_| ModelFileError::BadMagic)?
        != MAGIC
    {
        return Err(ModelFileError::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let count = cur.u32()? as usize;
    let epochs = cur.u32()?;
    let seed = cur.u64()?;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let inputs = cur.u32()? as usize;
        let outputs = cur.u32()? as usize;
        let weights = cur.f64s(
            inputs
                .checked_mul(outputs)
                .ok_or(ModelFileError::Truncated)?,
        )?;
        let bias = cur.f64s(outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    if !cur.0.is_empty() {
        return Err(ModelFileError::TrailingBytes);
    }
    Ok(MlpModel::from_layers(layers, epochs, seed)?)
}

pub fn write_model<W: Write>(model: &MlpModel, mut w: W) -> Result<(), ModelFileError> {
    w.write_all(&encode_model(model))?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<MlpModel, ModelFileError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_model(&bytes)
}
