//! A two-block 3-D convolutional stem that turns a raw `(3, T, H, W)` clip
//! into mid-level features.
//!
//! Each block is a `k x k x k` convolution with zero padding `(k - 1) / 2`,
//! zero bias and a ReLU. With the default strides `(1, 2, 2)` then
//! `(2, 2, 2)` the output is `(C_mid, ceil(T/2), ceil(H/4), ceil(W/4))`,
//! i.e. half the temporal and a quarter of the spatial resolution. Weights
//! are never trained; they are drawn from a seed (or set to a channel
//! identity for testing).

use rayon::prelude::*;

use crate::error::{FarError, Result};
use crate::rng::SeededRng;
use crate::tensor::{RTensor, Shape4};

/// Default mid-level channel count.
pub const DEFAULT_C_MID: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StemWeights {
    /// He-uniform, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, drawn layer by
    /// layer in `(out, in, kt, kh, kw)` order.
    Seeded(u64),
    /// 1 at the kernel centre where output channel equals input channel.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StemConfig {
    pub in_channels: usize,
    /// Output width of each block.
    pub widths: Vec<usize>,
    /// Odd kernel extent, shared by all axes and blocks.
    pub kernel: usize,
    /// `(t, h, w)` stride of each block.
    pub strides: Vec<(usize, usize, usize)>,
    pub weights: StemWeights,
}

impl Default for StemConfig {
    fn default() -> Self {
        Self::seeded(DEFAULT_C_MID, 0)
    }
}

impl StemConfig {
    pub fn seeded(c_mid: usize, seed: u64) -> Self {
        Self {
            in_channels: 3,
            widths: vec![16, c_mid],
            kernel: 3,
            strides: vec![(1, 2, 2), (2, 2, 2)],
            weights: StemWeights::Seeded(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) {
            return Err(FarError::Argument(format!("kernel {} must be odd", self.kernel)));
        }
        if self.widths.len() != self.strides.len() || self.widths.is_empty() {
            return Err(FarError::Argument(format!(
                "{} widths but {} strides",
                self.widths.len(),
                self.strides.len()
            )));
        }
        if self.in_channels == 0 || self.widths.contains(&0) {
            return Err(FarError::Argument("channel counts must be positive".into()));
        }
        if self.strides.iter().any(|&(a, b, c)| a == 0 || b == 0 || c == 0) {
            return Err(FarError::Argument("strides must be positive".into()));
        }
        Ok(())
    }

    /// Output shape for an input clip of shape `input`.
    pub fn output_shape(&self, input: Shape4) -> Shape4 {
        let (mut t, mut h, mut w) = (input.t, input.h, input.w);
        for &(st, sh, sw) in &self.strides {
            t = t.div_ceil(st);
            h = h.div_ceil(sh);
            w = w.div_ceil(sw);
        }
        Shape4 {
            c: *self.widths.last().unwrap_or(&input.c),
            t,
            h,
            w,
        }
    }

    fn layer_weights(&self) -> Vec<Vec<f64>> {
        let k3 = self.kernel.pow(3);
        let mut rng = match self.weights {
            StemWeights::Seeded(seed) => Some(SeededRng::new(seed)),
            StemWeights::Identity => None,
        };
        let mut cin = self.in_channels;
        let mut layers = Vec::with_capacity(self.widths.len());
        for &cout in &self.widths {
            let n = cout * cin * k3;
            let weights = match rng.as_mut() {
                Some(rng) => {
                    let bound = (6.0 / (cin * k3) as f64).sqrt();
                    (0..n).map(|_| rng.uniform_in(-bound, bound)).collect()
                }
                None => {
                    let centre = k3 / 2;
                    let mut v = vec![0.0; n];
                    for o in 0..cout.min(cin) {
                        v[(o * cin + o) * k3 + centre] = 1.0;
                    }
                    v
                }
            };
            layers.push(weights);
            cin = cout;
        }
        layers
    }
}

/// One zero-padded strided convolution followed by ReLU.
fn conv3d_relu(x: &RTensor, weights: &[f64], cout: usize, k: usize, stride: (usize, usize, usize)) -> Result<RTensor> {
    let s = x.shape4()?;
    let pad = (k / 2) as isize;
    let (ot, oh, ow) = (s.t.div_ceil(stride.0), s.h.div_ceil(stride.1), s.w.div_ceil(stride.2));
    let out_shape = Shape4::new(cout, ot, oh, ow)?;
    let plane = ot * oh * ow;
    let k3 = k * k * k;
    let src = x.data();
    let tap = |pos: usize, st: usize, kk: usize, n: usize| -> Option<usize> {
        let p = (pos * st) as isize + kk as isize - pad;
        (0..n as isize).contains(&p).then_some(p as usize)
    };

    let mut out = vec![0.0; out_shape.numel()];
    out.par_chunks_mut(plane).enumerate().for_each(|(o, dst)| {
        for t in 0..ot {
            for h in 0..oh {
                for w in 0..ow {
                    let mut acc = 0.0;
                    for i in 0..s.c {
                        let wbase = (o * s.c + i) * k3;
                        for kt in 0..k {
                            let Some(tt) = tap(t, stride.0, kt, s.t) else { continue };
                            for kh in 0..k {
                                let Some(hh) = tap(h, stride.1, kh, s.h) else { continue };
                                for kw in 0..k {
                                    let Some(ww) = tap(w, stride.2, kw, s.w) else { continue };
                                    acc += weights[wbase + (kt * k + kh) * k + kw] * src[s.index(i, tt, hh, ww)];
                                }
                            }
                        }
                    }
                    dst[(t * oh + h) * ow + w] = acc.max(0.0);
                }
            }
        }
    });
    RTensor::from_vec(out_shape, out)
}

pub fn stem_forward(clip: &RTensor, cfg: &StemConfig) -> Result<RTensor> {
    cfg.validate()?;
    let s = clip.shape4()?;
    if s.c != cfg.in_channels {
        return Err(FarError::shape(format!(
            "clip has {} channels, stem expects {}",
            s.c, cfg.in_channels
        )));
    }
    if s.t < 2 || s.h < 4 || s.w < 4 {
        return Err(FarError::shape(format!("clip {s} is smaller than the 2x4x4 minimum")));
    }
    let mut x = clip.clone();
    for ((weights, &cout), &stride) in cfg.layer_weights().iter().zip(&cfg.widths).zip(&cfg.strides) {
        x = conv3d_relu(&x, weights, cout, cfg.kernel, stride)?;
    }
    Ok(x)
}
