//! Model checkpoints.
//!
//! ```text
//! b"GZMDL1"
//! input_side, conv1 filters, conv2 filters, classes   (u32 LE each)
//! conv1.weight conv1.bias conv2.weight conv2.bias dense.weight dense.bias
//!                                                     (f64 LE, row-major)
//! ```

use std::fs;
use std::path::Path;

use gaze2class_core::classifier::{ModelParams, CLASSES, CONV1_FILTERS, CONV2_FILTERS};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"GZMDL1";

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(22 + 8 * params.parameter_count());
    out.extend_from_slice(MAGIC);
    for dim in [params.input_side(), CONV1_FILTERS, CONV2_FILTERS, CLASSES] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for (_, tensor) in params.tensors() {
        for v in tensor {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decode a checkpoint. With `expected_side`, a checkpoint for a different
/// input size is rejected.
pub fn decode(bytes: &[u8], path: &Path, expected_side: Option<usize>) -> Result<ModelParams> {
    if bytes.len() < 22 || &bytes[..6] != MAGIC {
        return Err(Error::format(path, "missing GZMDL1 header"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap()) as usize;
    let (side, c1, c2, classes) = (dim(0), dim(1), dim(2), dim(3));
    if (c1, c2, classes) != (CONV1_FILTERS, CONV2_FILTERS, CLASSES) {
        return Err(Error::format(
            path,
            format!("architecture {c1}/{c2}/{classes} does not match {CONV1_FILTERS}/{CONV2_FILTERS}/{CLASSES}"),
        ));
    }
    if let Some(want) = expected_side {
        if side != want {
            return Err(Error::format(
                path,
                format!("checkpoint is for {side}x{side} input, expected {want}x{want}"),
            ));
        }
    }
    let template = ModelParams::zeros(side).map_err(|e| Error::format(path, e.to_string()))?;
    let mut body = &bytes[22..];
    let mut tensors: [Vec<f64>; 6] = Default::default();
    for ((name, t), slot) in template.tensors().iter().zip(tensors.iter_mut()) {
        let n = 8 * t.len();
        if body.len() < n {
            return Err(Error::format(path, format!("truncated in tensor {name}")));
        }
        *slot = body[..n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        body = &body[n..];
    }
    if !body.is_empty() {
        return Err(Error::format(path, format!("{} trailing bytes", body.len())));
    }
    Ok(ModelParams::from_tensors(side, tensors)?)
}

pub fn save(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, encode(params)).map_err(Error::io(path))
}

pub fn load(path: &Path, expected_side: Option<usize>) -> Result<ModelParams> {
    decode(&fs::read(path).map_err(Error::io(path))?, path, expected_side)
}
