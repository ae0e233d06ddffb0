//! Binary model checkpoints.
//!
//! Layout: magic "IADI", format version (u32 LE), model kind (u8), a JSON
//! blob describing the architecture, the named parameter and state tensors
//! (f32 LE, row-major), and optionally the feature normalization statistics
//! that the model was trained with.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Model, ModelKind, ModelSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::features::NormStats;

pub const MAGIC: &[u8; 4] = b"IADI";
pub const VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn write_tensor(w: &mut impl Write, name: &str, t: &Tensor<f32>) -> std::io::Result<()> {
    write_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    write_u32(w, t.shape.len() as u32)?;
    for &d in &t.shape {
        write_u32(w, d as u32)?;
    }
    for &v in &t.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_tensor(r: &mut impl Read) -> std::io::Result<(String, Tensor<f32>)> {
    let name_len = read_u32(r)? as usize;
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let rank = read_u32(r)? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    let mut buf = [0u8; 4];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        data.push(f32::from_le_bytes(buf));
    }
    Ok((name, Tensor::from_vec(&shape, data)))
}

/// Collect every named tensor of the model: trainable parameters first,
/// then non-trainable state buffers, in visitation order.
fn collect_tensors(model: &mut Model<f32>) -> Vec<(String, Tensor<f32>)> {
    let mut out = Vec::new();
    model.visit_params(&mut |name, p| out.push((name.to_string(), p.value.clone())));
    model.visit_state(&mut |name, p| out.push((name.to_string(), p.value.clone())));
    out
}

pub fn save_checkpoint(
    path: &Path,
    model: &mut Model<f32>,
    norm: Option<&NormStats>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    write_u32(&mut w, VERSION).map_err(io)?;
    let kind: u8 = match model.spec.kind {
        ModelKind::Crnn => 0,
        ModelKind::ResBlstm => 1,
    };
    w.write_all(&[kind]).map_err(io)?;
    let spec_json = serde_json::to_vec(&model.spec)?;
    write_u32(&mut w, spec_json.len() as u32).map_err(io)?;
    w.write_all(&spec_json).map_err(io)?;
    let tensors = collect_tensors(model);
    write_u32(&mut w, tensors.len() as u32).map_err(io)?;
    for (name, t) in &tensors {
        write_tensor(&mut w, name, t).map_err(io)?;
    }
    match norm {
        Some(ns) => {
            w.write_all(&[1u8]).map_err(io)?;
            write_u32(&mut w, ns.mean.len() as u32).map_err(io)?;
            for &v in ns.mean.iter().chain(ns.std.iter()) {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        None => w.write_all(&[0u8]).map_err(io)?,
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, Option<NormStats>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e: std::io::Error| Error::io(path, e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "not a model checkpoint (bad magic)".into(),
        });
    }
    let version = read_u32(&mut r).map_err(io)?;
    if version != VERSION {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("unsupported checkpoint version {version}"),
        });
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind).map_err(io)?;
    let spec_len = read_u32(&mut r).map_err(io)? as usize;
    let mut spec_json = vec![0u8; spec_len];
    r.read_exact(&mut spec_json).map_err(io)?;
    let spec: ModelSpec = serde_json::from_slice(&spec_json)?;
    let expected_kind = match spec.kind {
        ModelKind::Crnn => 0u8,
        ModelKind::ResBlstm => 1u8,
    };
    if kind[0] != expected_kind {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "kind byte disagrees with architecture description".into(),
        });
    }
    let mut model = Model::new(spec)?;
    let n_tensors = read_u32(&mut r).map_err(io)? as usize;
    let mut stored = std::collections::HashMap::new();
    for _ in 0..n_tensors {
        let (name, t) = read_tensor(&mut r).map_err(io)?;
        stored.insert(name, t);
    }
    let mut restore_err: Option<String> = None;
    let mut restore = |name: &str, p: &mut super::tensor::Param<f32>| {
        match stored.get(name) {
            Some(t) if t.shape == p.value.shape => p.value = t.clone(),
            Some(t) => {
                restore_err.get_or_insert(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    t.shape, p.value.shape
                ));
            }
            None => {
                restore_err.get_or_insert(format!("missing tensor '{name}'"));
            }
        }
    };
    model.visit_params(&mut |name, p| restore(name, p));
    model.visit_state(&mut |name, p| restore(name, p));
    if let Some(msg) = restore_err {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: msg,
        });
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag).map_err(io)?;
    let norm = if flag[0] == 1 {
        let n = read_u32(&mut r).map_err(io)? as usize;
        let mut vals = Vec::with_capacity(2 * n);
        let mut buf = [0u8; 4];
        for _ in 0..2 * n {
            r.read_exact(&mut buf).map_err(io)?;
            vals.push(f32::from_le_bytes(buf));
        }
        Some(NormStats {
            mean: vals[..n].to_vec(),
            std: vals[n..].to_vec(),
        })
    } else {
        None
    };
    Ok((model, norm))
}
