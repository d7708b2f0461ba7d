//! `URTD` raw tensor container.
//!
//! Layout (all little-endian):
//!
//! | offset | size      | field                         |
//! |--------|-----------|-------------------------------|
//! | 0      | 4         | magic `b"URTD"`               |
//! | 4      | 1         | rank                          |
//! | 5      | 1         | dtype code (0 = f32)          |
//! | 6      | 2         | reserved, zero                |
//! | 8      | 4 × rank  | dims, u32 each                |
//! | ...    | 4 × numel | payload, C order              |

use std::path::Path;

use super::{format_err, read_bytes, write_bytes};
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"URTD";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
}

/// Dense f32 tensor in C order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let numel: usize = dims.iter().product();
        if numel != data.len() {
            return Err(Error::InvalidArgument(format!(
                "tensor dims {dims:?} need {numel} elements, got {}",
                data.len()
            )));
        }
        if dims.len() > u8::MAX as usize {
            return Err(Error::InvalidArgument(format!("rank {} too large", dims.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.push(self.dims.len() as u8);
        out.push(DType::F32 as u8);
        out.extend_from_slice(&0u16.to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 8 || &bytes[0..4] != TENSOR_MAGIC {
            return Err(format_err(path, "missing URTD magic"));
        }
        let rank = bytes[4] as usize;
        if bytes[5] != DType::F32 as u8 {
            return Err(format_err(path, format!("unsupported dtype code {}", bytes[5])));
        }
        let header = 8 + 4 * rank;
        if bytes.len() < header {
            return Err(format_err(path, "truncated dims"));
        }
        let dims: Vec<usize> = bytes[8..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format_err(path, "dims overflow"))?;
        let payload = &bytes[header..];
        if payload.len() != numel * 4 {
            return Err(format_err(
                path,
                format!("payload has {} bytes, dims {dims:?} need {}", payload.len(), numel * 4),
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    Tensor::from_bytes(&read_bytes(path)?, path)
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    write_bytes(path, &tensor.to_bytes())
}
