//! Binary 8-bit greyscale PGM ("P5") export for masks and frames.

use std::fs;
use std::path::Path;

use crate::error::{FarError, Result};
use crate::tensor::{DynamicMask, RTensor};

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height || width == 0 || height == 0 {
        return Err(FarError::shape(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    fs::write(path, encode_pgm(width, height, pixels)?)?;
    Ok(())
}

/// `round(255 * |v| / scale)`, or all zeros when `scale` is zero.
pub fn quantize(values: &[f64], scale: f64) -> Vec<u8> {
    if scale <= 0.0 {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|v| (255.0 * v.abs() / scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// One heatmap per channel, each max-normalized to `[0, 255]`.
pub fn mask_heatmaps(mask: &DynamicMask) -> Vec<Vec<u8>> {
    let (c, _, _) = mask.dims();
    (0..c)
        .map(|ch| quantize(mask.channel(ch), mask.channel_max(ch)))
        .collect()
}

/// Magnitude image of one `(channel, frame)` plane of a `(c, t, h, w)`
/// tensor, scaled by the tensor's overall largest magnitude.
pub fn frame_image(t: &RTensor, channel: usize, frame: usize) -> Result<Vec<u8>> {
    let s = t.shape4()?;
    if channel >= s.c || frame >= s.t {
        return Err(FarError::Argument(format!(
            "plane ({channel}, {frame}) outside {s}"
        )));
    }
    let start = s.index(channel, frame, 0, 0);
    Ok(quantize(&t.data()[start..start + s.hw()], t.max_abs()))
}
