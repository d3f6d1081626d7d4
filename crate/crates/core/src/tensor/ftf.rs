//! FTF tensor files.
//!
//! Little-endian layout, no padding:
//!
//! ```text
//! "FTF1" | dtype u8 (0 real, 1 complex) | rank u8 (1..=4) | reserved u16 = 0
//!        | rank x u32 extents | row-major f64 payload (re, im interleaved)
//! ```

use std::fs;
use std::path::Path;

use super::{CTensor, RTensor, Shape};
use crate::error::{FarError, Result};
use crate::Complex64;

const MAGIC: &[u8; 4] = b"FTF1";
const DTYPE_REAL: u8 = 0;
const DTYPE_COMPLEX: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum FtfTensor {
    Real(RTensor),
    Complex(CTensor),
}

impl From<RTensor> for FtfTensor {
    fn from(t: RTensor) -> Self {
        FtfTensor::Real(t)
    }
}

impl From<CTensor> for FtfTensor {
    fn from(t: CTensor) -> Self {
        FtfTensor::Complex(t)
    }
}

impl FtfTensor {
    pub fn into_real(self) -> Result<RTensor> {
        match self {
            FtfTensor::Real(t) => Ok(t),
            FtfTensor::Complex(_) => Err(FarError::format("expected real dtype, found complex")),
        }
    }

    pub fn into_complex(self) -> Result<CTensor> {
        match self {
            FtfTensor::Complex(t) => Ok(t),
            FtfTensor::Real(_) => Err(FarError::format("expected complex dtype, found real")),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (dtype, shape, payload): (u8, &Shape, Vec<f64>) = match self {
            FtfTensor::Real(t) => (DTYPE_REAL, t.shape(), t.data().to_vec()),
            FtfTensor::Complex(t) => (
                DTYPE_COMPLEX,
                t.shape(),
                t.data().iter().flat_map(|z| [z.re, z.im]).collect(),
            ),
        };
        let mut out = Vec::with_capacity(8 + 4 * shape.rank() + 8 * payload.len());
        out.extend_from_slice(MAGIC);
        out.push(dtype);
        out.push(shape.rank() as u8);
        out.extend_from_slice(&0u16.to_le_bytes());
        for &d in shape.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(FarError::format("bad magic"));
        }
        if bytes.len() < 8 {
            return Err(FarError::format("truncated header"));
        }
        let dtype = bytes[4];
        let rank = bytes[5] as usize;
        let reserved = u16::from_le_bytes([bytes[6], bytes[7]]);
        if dtype != DTYPE_REAL && dtype != DTYPE_COMPLEX {
            return Err(FarError::format(format!("unknown dtype {dtype}")));
        }
        if rank == 0 || rank > Shape::MAX_RANK {
            return Err(FarError::format(format!("rank {rank} not in 1..=4")));
        }
        if reserved != 0 {
            return Err(FarError::format(format!("reserved field is {reserved}, expected 0")));
        }
        let header_len = 8 + 4 * rank;
        if bytes.len() < header_len {
            return Err(FarError::format("truncated extents"));
        }
        let dims: Vec<usize> = bytes[8..header_len]
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
            .collect();
        let shape = Shape::new(&dims).map_err(|e| FarError::format(e.to_string()))?;
        let per_elem = if dtype == DTYPE_REAL { 1 } else { 2 };
        let expected = shape.numel() * per_elem * 8;
        let payload = &bytes[header_len..];
        if payload.len() != expected {
            return Err(FarError::format(format!(
                "payload is {} bytes, extents {dims:?} need {expected}",
                payload.len()
            )));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let wrap = |e: FarError| FarError::format(e.to_string());
        if dtype == DTYPE_REAL {
            RTensor::from_vec(shape, values).map(FtfTensor::Real).map_err(wrap)
        } else {
            let data = values
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect();
            CTensor::from_vec(shape, data).map(FtfTensor::Complex).map_err(wrap)
        }
    }
}

pub fn write_ftf(tensor: impl Into<FtfTensor>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, tensor.into().encode())?;
    Ok(())
}

pub fn read_ftf(path: impl AsRef<Path>) -> Result<FtfTensor> {
    FtfTensor::decode(&fs::read(path)?)
}
