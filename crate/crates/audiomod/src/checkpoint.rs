//! Checkpoint container: magic "TCK1", u32 parameter count, then per entry
//! u16 name length, UTF-8 name, u8 ndim, u32 dims, little-endian f32 payload.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::NamedParam;
use crate::tensor::Scalar;

const MAGIC: &[u8; 4] = b"TCK1";

/// Serializes all named tensors (parameters and running statistics) to `w`.
pub fn write_checkpoint_to<T: Scalar>(w: &mut impl Write, params: &[NamedParam<T>]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params {
        let name = p.name.as_bytes();
        if name.len() > u16::MAX as usize {
            return Err(Error::Format(format!("parameter name too long: {}", p.name)));
        }
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name)?;
        let shape = p.tensor.shape();
        w.write_all(&[shape.len() as u8])?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        p.tensor.with_data(|data| -> Result<()> {
            for &v in data {
                w.write_all(&(v.to_f64() as f32).to_le_bytes())?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub fn save_checkpoint<T: Scalar>(path: &Path, params: &[NamedParam<T>]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint_to(&mut file, params)
}

/// Raw checkpoint contents: name -> (shape, values).
pub type RawCheckpoint = BTreeMap<String, (Vec<usize>, Vec<f32>)>;

pub fn read_checkpoint(path: &Path) -> Result<RawCheckpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_checkpoint(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_checkpoint(bytes: &[u8]) -> Result<RawCheckpoint> {
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(*off..*off + n)
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        *off += n;
        Ok(s)
    };
    if take(&mut off, 4)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let count = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    let mut out = RawCheckpoint::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut off, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut off, name_len)?.to_vec())
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let ndim = take(&mut off, 1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize);
        }
        let numel: usize = shape.iter().product();
        let data = take(&mut off, numel * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if out.insert(name.clone(), (shape, data)).is_some() {
            return Err(Error::Format(format!("duplicate parameter {name}")));
        }
    }
    if off != bytes.len() {
        return Err(Error::Format("trailing bytes after last parameter".into()));
    }
    Ok(out)
}

/// Copies checkpoint values into the model's named tensors, enforcing exact
/// name-set and shape agreement in both directions.
pub fn apply_checkpoint<T: Scalar>(params: &[NamedParam<T>], raw: &RawCheckpoint) -> Result<()> {
    if params.len() != raw.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} tensors, model expects {}",
            raw.len(),
            params.len()
        )));
    }
    for p in params {
        let (shape, data) = raw
            .get(&p.name)
            .ok_or_else(|| Error::Format(format!("checkpoint is missing {}", p.name)))?;
        if shape != p.tensor.shape() {
            return Err(Error::Format(format!(
                "{}: checkpoint shape {:?} != model shape {:?}",
                p.name,
                shape,
                p.tensor.shape()
            )));
        }
        p.tensor.update_data(|dst| {
            for (d, &s) in dst.iter_mut().zip(data) {
                *d = T::from_f64(f64::from(s));
            }
        });
    }
    Ok(())
}

pub fn load_into_model<T: Scalar>(path: &Path, params: &[NamedParam<T>]) -> Result<()> {
    apply_checkpoint(params, &read_checkpoint(path)?)
}
