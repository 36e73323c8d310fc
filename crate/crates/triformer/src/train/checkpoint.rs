//! TFCK checkpoints: config echo, named f32 tensors, sha256 trailer.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::net::{Model, TriFormerConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"TFCK";
const DTYPE: &str = "f32le";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TriFormerConfig,
    tensors: Vec<TensorEntry>,
    dtype: String,
}

/// Writes every model parameter (narrowed to f32) plus the config, with a
/// sha256 of the whole payload as trailer.
pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    model.visit(&mut |name, t| {
        entries.push(TensorEntry { name, shape: t.shape().to_vec() });
        let at = payload.len();
        payload.resize(at + 4 * t.numel(), 0);
        for (chunk, &v) in payload[at..].chunks_exact_mut(4).zip(t.data()) {
            LittleEndian::write_f32(chunk, v.to_f32_lossy());
        }
    });
    let header = Header {
        config: model.config.clone(),
        tensors: entries,
        dtype: DTYPE.to_string(),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut bytes = Vec::with_capacity(8 + header_bytes.len() + payload.len() + 32);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_bytes);
    bytes.extend_from_slice(&payload);
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    fs::write(path, bytes)?;
    Ok(())
}

/// Loads a TFCK checkpoint into a fresh `f32` model. Any disagreement —
/// bad magic, checksum, missing/unknown/present-but-misshapen tensors —
/// is a format error naming the offender.
pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 40 || &bytes[..4] != MAGIC {
        return Err(Error::format(format!("{}: not a TFCK checkpoint", path.display())));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(Error::format(format!("{}: checksum mismatch", path.display())));
    }
    let header_len = LittleEndian::read_u32(&bytes[4..8]) as usize;
    let payload_at = 8 + header_len;
    if body.len() < payload_at {
        return Err(Error::format(format!("{}: truncated header", path.display())));
    }
    let header: Header = serde_json::from_slice(&body[8..payload_at])
        .map_err(|e| Error::format(format!("{}: bad header: {e}", path.display())))?;
    if header.dtype != DTYPE {
        return Err(Error::format(format!(
            "{}: unsupported dtype {:?}",
            path.display(),
            header.dtype
        )));
    }

    let mut stored: std::collections::BTreeMap<String, (Vec<usize>, Vec<f32>)> =
        std::collections::BTreeMap::new();
    let mut at = payload_at;
    for e in header.tensors {
        let numel: usize = e.shape.iter().product();
        let end = at + 4 * numel;
        if end > body.len() {
            return Err(Error::format(format!(
                "{}: tensor {} overruns the payload",
                path.display(),
                e.name
            )));
        }
        let mut data = vec![0f32; numel];
        LittleEndian::read_f32_into(&body[at..end], &mut data);
        if stored.insert(e.name.clone(), (e.shape, data)).is_some() {
            return Err(Error::format(format!(
                "{}: duplicate tensor {}",
                path.display(),
                e.name
            )));
        }
        at = end;
    }
    if at != body.len() {
        return Err(Error::format(format!(
            "{}: {} payload bytes beyond the declared tensors",
            path.display(),
            body.len() - at
        )));
    }

    let mut model = Model::<f32>::init(header.config, 0)?;
    let mut missing = Vec::new();
    let mut conflicts = Vec::new();
    let mut failed: Option<Error> = None;
    model.visit_mut(&mut |name, t| {
        match stored.remove(&name) {
            None => missing.push(name),
            Some((shape, _)) if shape != t.shape() => {
                conflicts.push(format!("{name}: file {shape:?} vs model {:?}", t.shape()));
            }
            Some((shape, data)) => match Tensor::from_vec(shape, data) {
                Ok(new) => *t = new,
                Err(e) => failed = Some(e),
            },
        }
    });
    if let Some(e) = failed {
        return Err(e);
    }
    if !missing.is_empty() {
        return Err(Error::format(format!(
            "{}: missing tensors: {}",
            path.display(),
            missing.join(", ")
        )));
    }
    if !conflicts.is_empty() {
        return Err(Error::format(format!(
            "{}: shape conflicts: {}",
            path.display(),
            conflicts.join("; ")
        )));
    }
    if !stored.is_empty() {
        let names: Vec<String> = stored.into_keys().collect();
        return Err(Error::format(format!(
            "{}: unexpected tensors: {}",
            path.display(),
            names.join(", ")
        )));
    }
    Ok(model)
}
