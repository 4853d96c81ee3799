//! Tensor container: 8-byte magic, u64 LE header length, JSON header
//! (metadata plus tensor manifest), then all tensors as little-endian `f32`.
//!
//! The header records a SHA-256 of the payload so truncation or bit rot is
//! caught on load.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Matrix;

use super::forward::ActivationTrace;
use super::weights::{init_shapes, ModelWeights};
use super::ModelConfig;

const MAGIC: &[u8; 8] = b"OCRSTNS1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the payload, in elements.
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    tensors: Vec<ManifestEntry>,
    payload_elements: usize,
    payload_sha256: String,
}

pub fn write_tensor_file(
    path: &Path,
    kind: &str,
    meta: serde_json::Value,
    tensors: &[Tensor],
) -> Result<()> {
    let mut payload = Vec::new();
    let mut manifest = Vec::with_capacity(tensors.len());
    let mut offset = 0;
    for t in tensors {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::Format(format!(
                "tensor {}: shape {:?} does not hold {} values",
                t.name,
                t.shape,
                t.data.len()
            )));
        }
        manifest.push(ManifestEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset,
        });
        offset += t.data.len();
        for &v in &t.data {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let header = Header {
        kind: kind.to_string(),
        meta,
        tensors: manifest,
        payload_elements: offset,
        payload_sha256: hex::encode(Sha256::digest(&payload)),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + header_bytes.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&payload);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Returns `(kind, meta, tensors)`.
pub fn read_tensor_file(path: &Path) -> Result<(String, serde_json::Value, Vec<Tensor>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format(format!(
            "{}: not a tensor file",
            path.display()
        )));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() < hlen {
        return Err(Error::Format(format!(
            "{}: truncated header",
            path.display()
        )));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])
        .map_err(|e| Error::Format(format!("{}: bad header: {e}", path.display())))?;
    let payload = &body[hlen..];
    if payload.len() != header.payload_elements * 4 {
        return Err(Error::Format(format!(
            "{}: payload has {} bytes, header declares {} elements (truncated or padded file)",
            path.display(),
            payload.len(),
            header.payload_elements
        )));
    }
    if hex::encode(Sha256::digest(payload)) != header.payload_sha256 {
        return Err(Error::Format(format!(
            "{}: payload checksum mismatch",
            path.display()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        let len: usize = e.shape.iter().product();
        let end = e
            .offset
            .checked_add(len)
            .filter(|&end| end <= values.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "tensor {}: shape {:?} at offset {} overruns the payload of {} elements",
                    e.name,
                    e.shape,
                    e.offset,
                    values.len()
                ))
            })?;
        tensors.push(Tensor {
            name: e.name,
            shape: e.shape,
            data: values[e.offset..end].to_vec(),
        });
    }
    Ok((header.kind, header.meta, tensors))
}

pub fn save_weights(path: &Path, w: &ModelWeights) -> Result<()> {
    write_tensor_file(
        path,
        "model-weights",
        serde_json::to_value(&w.config)?,
        &w.to_tensors(),
    )
}

/// Load and validate against the manifest implied by the stored config.
pub fn load_weights(path: &Path) -> Result<ModelWeights> {
    let (kind, meta, tensors) = read_tensor_file(path)?;
    if kind != "model-weights" {
        return Err(Error::Format(format!(
            "{}: holds {kind}, not model weights",
            path.display()
        )));
    }
    let config: ModelConfig = serde_json::from_value(meta)?;
    config.validate()?;
    let expected = init_shapes(&config);
    let diff: Vec<String> = expected
        .iter()
        .zip(tensors.iter().map(Some).chain(std::iter::repeat(None)))
        .filter_map(|((name, shape), got)| match got {
            Some(t) if t.name == *name && t.shape == *shape => None,
            Some(t) => Some(format!("{name}{shape:?} != {}{:?}", t.name, t.shape)),
            None => Some(format!("{name}{shape:?} missing")),
        })
        .chain(
            tensors
                .iter()
                .skip(expected.len())
                .map(|t| format!("unexpected {}", t.name)),
        )
        .collect();
    if !diff.is_empty() {
        return Err(Error::Format(format!(
            "manifest mismatch: {}",
            diff.join("; ")
        )));
    }
    ModelWeights::from_tensors(config, tensors)
}

pub fn save_trace(path: &Path, trace: &ActivationTrace) -> Result<()> {
    let tensors: Vec<Tensor> = trace
        .layers()
        .map(|(l, m)| Tensor {
            name: format!("layer.{l}"),
            shape: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        })
        .collect();
    write_tensor_file(path, "activation-trace", serde_json::Value::Null, &tensors)
}

pub fn load_trace(path: &Path) -> Result<ActivationTrace> {
    let (kind, _, tensors) = read_tensor_file(path)?;
    if kind != "activation-trace" {
        return Err(Error::Format(format!(
            "{}: holds {kind}, not a trace",
            path.display()
        )));
    }
    let mut trace = ActivationTrace::new();
    for t in tensors {
        let layer = t
            .name
            .strip_prefix("layer.")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("unexpected trace tensor {}", t.name)))?;
        if t.shape.len() != 2 {
            return Err(Error::Format(format!("tensor {}: expected 2-D", t.name)));
        }
        trace.insert(layer, Matrix::from_vec(t.shape[0], t.shape[1], t.data)?);
    }
    Ok(trace)
}
